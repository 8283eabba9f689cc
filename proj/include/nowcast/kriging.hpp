#pragma once

#include "nowcast/geo.hpp"
#include "nowcast/tensor.hpp"
#include "nowcast/variogram.hpp"

#include <Eigen/Core>

#include <vector>

namespace nowcast {

struct KrigingWeights {
  Eigen::VectorXd weights;  // one per distinct site, sums to 1
  double lagrange = 0.0;
};

/// Averages observations that share coordinates. Returns the distinct
/// positions and the per-position mean values.
void dedupe_sites(const std::vector<LatLon>& positions,
                  const std::vector<double>& values,
                  std::vector<LatLon>& out_positions,
                  std::vector<double>& out_values);

/// Ordinary-kriging system for a fixed site set and variogram. The
/// (m+1)x(m+1) matrix is factored once with a singular value decomposition
/// and applied as a pseudo-inverse (minimum-norm least squares), so weight
/// solves for many query points are cheap.
class OrdinaryKrigingSystem {
 public:
  OrdinaryKrigingSystem(std::vector<LatLon> sites, VariogramModel model,
                        double sv_cutoff_rel = 1e-10);

  KrigingWeights solve(const LatLon& query) const;
  double estimate(const KrigingWeights& w,
                  const std::vector<double>& values) const;

  /// Reference path: direct dense solve of the same system (no pseudo-
  /// inverse). Used to cross-check conditioning-sensitive results.
  KrigingWeights solve_direct(const LatLon& query) const;

  const std::vector<LatLon>& sites() const { return sites_; }
  const VariogramModel& model() const { return model_; }
  double condition_number() const { return condition_; }

 private:
  Eigen::VectorXd rhs(const LatLon& query) const;

  std::vector<LatLon> sites_;
  VariogramModel model_;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd pinv_;
  double condition_ = 0.0;
};

/// Convenience wrapper matching the one-query use case.
KrigingWeights solve_ordinary_kriging(const std::vector<LatLon>& sites,
                                      const VariogramModel& model,
                                      const LatLon& query);

/// Kriges one variable at one timestep onto the georeferenced grid.
/// Observations at coincident coordinates are pre-averaged; a single
/// distinct site yields a constant map.
Eigen::MatrixXd rasterize_variable(const std::vector<LatLon>& positions,
                                   const std::vector<double>& values,
                                   const GridGeoreference& grid,
                                   const VariogramModel& model);

struct KrigeConfig {
  int variogram_bins = 8;
  GridGeoreference grid;
};

/// Per-sample stack of kriged maps, shaped (lags=12, variables=8, 64, 64).
/// Flattening order for model input is lag-major, variable-minor.
struct KrigeStack {
  Tensor maps;  // (12, 8, 64, 64)
  GridGeoreference grid;
};

/// Builds the full stack for one sample: per (variable, timestep) the
/// variogram is fitted independently from the station values and the
/// variable is kriged onto the grid.
/// station_tensor: (stations, variables, lags) row-major.
KrigeStack build_krige_stack(const std::vector<double>& station_tensor,
                             int n_stations, int n_variables, int n_lags,
                             const std::vector<LatLon>& station_positions,
                             const KrigeConfig& config);

}  // namespace nowcast
