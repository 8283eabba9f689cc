#include "nowcast/geo.hpp"

#include <doctest.h>

using namespace nowcast;

TEST_CASE("haversine distance matches an independent computation") {
  // De Bilt to Den Helder, computed separately with R = 6371 km
  const LatLon de_bilt{52.0989, 5.1797};
  const LatLon den_helder{52.9275, 4.7392};
  CHECK(great_circle_distance(de_bilt, den_helder) ==
        doctest::Approx(96.83771945952826).epsilon(1e-12));

  const LatLon sw{51.5, 4.5}, ne{52.5, 6.5};
  CHECK(great_circle_distance(sw, ne) ==
        doctest::Approx(176.3704710167957).epsilon(1e-12));
}

TEST_CASE("haversine basic properties") {
  const LatLon a{52.0, 5.0}, b{51.5, 6.0};
  CHECK(great_circle_distance(a, a) == doctest::Approx(0.0));
  CHECK(great_circle_distance(a, b) ==
        doctest::Approx(great_circle_distance(b, a)));
  CHECK(great_circle_distance(a, b) > 0.0);
}

TEST_CASE("latitudes beyond the poles are rejected") {
  CHECK_THROWS_AS(great_circle_distance({91.0, 0.0}, {0.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(great_circle_distance({0.0, 0.0}, {-90.5, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("grid georeference maps cell centers north-up") {
  GridGeoreference grid;  // default 64x64 over the radar cutout
  const LatLon top_left = grid.cell_center(0, 0);
  const LatLon bottom_right = grid.cell_center(63, 63);

  const double dlat = (grid.bounds.lat_max - grid.bounds.lat_min) / 64.0;
  const double dlon = (grid.bounds.lon_max - grid.bounds.lon_min) / 64.0;
  CHECK(top_left.lat == doctest::Approx(grid.bounds.lat_max - dlat / 2));
  CHECK(top_left.lon == doctest::Approx(grid.bounds.lon_min + dlon / 2));
  CHECK(bottom_right.lat == doctest::Approx(grid.bounds.lat_min + dlat / 2));
  CHECK(bottom_right.lon == doctest::Approx(grid.bounds.lon_max - dlon / 2));

  // rows move south, columns move east
  CHECK(grid.cell_center(1, 0).lat < top_left.lat);
  CHECK(grid.cell_center(0, 1).lon > top_left.lon);
}
