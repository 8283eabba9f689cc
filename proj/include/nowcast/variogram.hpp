#pragma once

#include "nowcast/geo.hpp"

#include <Eigen/Core>

#include <vector>

namespace nowcast {

/// Spherical variogram: gamma(h) = nugget + psill * (1.5 h/r - 0.5 (h/r)^3)
/// for 0 < h <= r, and nugget + psill beyond the range. By convention the
/// model evaluates to the nugget as h -> 0+.
struct VariogramModel {
  double nugget = 0.0;
  double partial_sill = 0.0;
  double range_km = 1.0;

  // fit diagnostics
  double residual_norm = 0.0;
  int n_bins = 0;

  double operator()(double h) const {
    if (h <= 0.0) return nugget;
    if (h >= range_km) return nugget + partial_sill;
    double u = h / range_km;
    return nugget + partial_sill * (1.5 * u - 0.5 * u * u * u);
  }

  /// Constant-field fallback (all semivariances ~ 0).
  bool is_sentinel() const { return nugget == 0.0 && partial_sill == 0.0; }
};

struct EmpiricalVariogram {
  std::vector<double> lag_km;        // bin centers, empty bins omitted
  std::vector<double> semivariance;  // mean of 0.5 (v_i - v_j)^2 per bin
  std::vector<int> pair_count;
  double max_distance_km = 0.0;
};

/// Isotropic empirical variogram over great-circle distances with n_bins
/// equal-width lag bins on [0, max pairwise distance].
EmpiricalVariogram empirical_variogram(const std::vector<LatLon>& sites,
                                       const std::vector<double>& values,
                                       int n_bins = 8);

/// Bounded least-squares fit of (nugget, partial sill, range) to the
/// spherical model. nugget, psill >= 0 and range in (0, 1.5 * max lag].
/// All-zero semivariances yield the sentinel model.
VariogramModel fit_spherical(const std::vector<double>& lags,
                             const std::vector<double>& semivariances);

}  // namespace nowcast
