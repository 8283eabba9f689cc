#pragma once

#include <cmath>
#include <stdexcept>

namespace nowcast {

inline constexpr double kEarthRadiusKm = 6371.0;

struct LatLon {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

/// Haversine great-circle distance in km.
inline double great_circle_distance(const LatLon& a, const LatLon& b) {
  if (std::abs(a.lat) > 90.0 || std::abs(b.lat) > 90.0)
    throw std::invalid_argument("great_circle_distance: latitude out of range");
  const double deg = M_PI / 180.0;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h =
      s1 * s1 + std::cos(a.lat * deg) * std::cos(b.lat * deg) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Geographic bounding box of the radar cutout.
struct GeoBounds {
  double lon_min = 4.29;
  double lon_max = 6.73;
  double lat_min = 51.32;
  double lat_max = 52.81;
};

/// Maps grid cells of a north-up raster to geographic cell-center
/// coordinates by linear interpolation of the bounding box.
struct GridGeoreference {
  GeoBounds bounds;
  int rows = 64;
  int cols = 64;

  LatLon cell_center(int row, int col) const {
    LatLon p;
    p.lat = bounds.lat_max -
            (row + 0.5) / rows * (bounds.lat_max - bounds.lat_min);
    p.lon = bounds.lon_min +
            (col + 0.5) / cols * (bounds.lon_max - bounds.lon_min);
    return p;
  }
};

}  // namespace nowcast
