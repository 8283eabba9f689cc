#include "nowcast/kriging.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace nowcast {

void dedupe_sites(const std::vector<LatLon>& positions,
                  const std::vector<double>& values,
                  std::vector<LatLon>& out_positions,
                  std::vector<double>& out_values) {
  if (positions.size() != values.size())
    throw std::invalid_argument("dedupe_sites: size mismatch");
  out_positions.clear();
  out_values.clear();
  std::vector<int> counts;
  const double tol = 1e-9;
  for (size_t i = 0; i < positions.size(); ++i) {
    bool merged = false;
    for (size_t j = 0; j < out_positions.size(); ++j) {
      if (std::abs(out_positions[j].lat - positions[i].lat) < tol &&
          std::abs(out_positions[j].lon - positions[i].lon) < tol) {
        out_values[j] += values[i];
        counts[j] += 1;
        merged = true;
        break;
      }
    }
    if (!merged) {
      out_positions.push_back(positions[i]);
      out_values.push_back(values[i]);
      counts.push_back(1);
    }
  }
  for (size_t j = 0; j < out_values.size(); ++j) out_values[j] /= counts[j];
}

OrdinaryKrigingSystem::OrdinaryKrigingSystem(std::vector<LatLon> sites,
                                             VariogramModel model,
                                             double sv_cutoff_rel)
    : sites_(std::move(sites)), model_(model) {
  const Eigen::Index m = static_cast<Eigen::Index>(sites_.size());
  if (m < 1) throw std::invalid_argument("OrdinaryKrigingSystem: no sites");

  matrix_.resize(m + 1, m + 1);
  matrix_.setZero();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double g = model_(great_circle_distance(sites_[i], sites_[j]));
      matrix_(i, j) = g;
      matrix_(j, i) = g;
    }
  }
  // zero diagonal; unbiasedness row/column
  for (Eigen::Index i = 0; i < m; ++i) {
    matrix_(i, m) = 1.0;
    matrix_(m, i) = 1.0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix_,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  if (smax <= 0.0)
    throw std::runtime_error("ordinary kriging: zero system matrix");
  double cutoff = sv_cutoff_rel * smax;
  Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
  double smin_kept = smax;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > cutoff) {
      inv_sv(k) = 1.0 / sv(k);
      smin_kept = sv(k);
    }
  }
  condition_ = smax / smin_kept;
  pinv_ = svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::VectorXd OrdinaryKrigingSystem::rhs(const LatLon& query) const {
  const Eigen::Index m = static_cast<Eigen::Index>(sites_.size());
  Eigen::VectorXd b(m + 1);
  for (Eigen::Index i = 0; i < m; ++i)
    b(i) = model_(great_circle_distance(query, sites_[i]));
  b(m) = 1.0;
  return b;
}

KrigingWeights OrdinaryKrigingSystem::solve(const LatLon& query) const {
  const Eigen::Index m = static_cast<Eigen::Index>(sites_.size());
  Eigen::VectorXd x = pinv_ * rhs(query);
  KrigingWeights w;
  w.weights = x.head(m);
  w.lagrange = x(m);
  double sum = w.weights.sum();
  if (!std::isfinite(sum) || std::abs(sum - 1.0) > 1e-6)
    throw std::runtime_error(
        "ordinary kriging: unbiasedness violated (weight sum " +
        std::to_string(sum) + ", condition " + std::to_string(condition_) + ")");
  return w;
}

KrigingWeights OrdinaryKrigingSystem::solve_direct(const LatLon& query) const {
  const Eigen::Index m = static_cast<Eigen::Index>(sites_.size());
  Eigen::VectorXd x = matrix_.fullPivLu().solve(rhs(query));
  KrigingWeights w;
  w.weights = x.head(m);
  w.lagrange = x(m);
  return w;
}

double OrdinaryKrigingSystem::estimate(const KrigingWeights& w,
                                       const std::vector<double>& values) const {
  if (values.size() != sites_.size())
    throw std::invalid_argument("kriging estimate: value count mismatch");
  double e = 0.0;
  for (size_t i = 0; i < values.size(); ++i)
    e += w.weights(static_cast<Eigen::Index>(i)) * values[i];
  return e;
}

KrigingWeights solve_ordinary_kriging(const std::vector<LatLon>& sites,
                                      const VariogramModel& model,
                                      const LatLon& query) {
  return OrdinaryKrigingSystem(sites, model).solve(query);
}

Eigen::MatrixXd rasterize_variable(const std::vector<LatLon>& positions,
                                   const std::vector<double>& values,
                                   const GridGeoreference& grid,
                                   const VariogramModel& model) {
  std::vector<LatLon> sites;
  std::vector<double> site_values;
  dedupe_sites(positions, values, sites, site_values);
  if (sites.empty())
    throw std::invalid_argument("rasterize_variable: no observations");

  Eigen::MatrixXd out(grid.rows, grid.cols);
  if (sites.size() == 1) {
    out.setConstant(site_values[0]);
    return out;
  }

  OrdinaryKrigingSystem system(sites, model);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      KrigingWeights w = system.solve(grid.cell_center(r, c));
      out(r, c) = system.estimate(w, site_values);
    }
  }
  return out;
}

KrigeStack build_krige_stack(const std::vector<double>& station_tensor,
                             int n_stations, int n_variables, int n_lags,
                             const std::vector<LatLon>& station_positions,
                             const KrigeConfig& config) {
  if (static_cast<int>(station_positions.size()) != n_stations)
    throw std::invalid_argument("build_krige_stack: position count mismatch");
  if (station_tensor.size() !=
      static_cast<size_t>(n_stations) * n_variables * n_lags)
    throw std::invalid_argument("build_krige_stack: tensor size mismatch");

  const int rows = config.grid.rows, cols = config.grid.cols;
  KrigeStack stack;
  stack.grid = config.grid;
  stack.maps = Tensor({n_lags, n_variables, rows, cols});

  for (int lag = 0; lag < n_lags; ++lag) {
    for (int var = 0; var < n_variables; ++var) {
      std::vector<double> obs(n_stations);
      for (int s = 0; s < n_stations; ++s)
        obs[s] = station_tensor[(static_cast<size_t>(s) * n_variables + var) *
                                    n_lags +
                                lag];

      std::vector<LatLon> sites;
      std::vector<double> site_values;
      dedupe_sites(station_positions, obs, sites, site_values);

      VariogramModel model;
      if (sites.size() >= 2) {
        EmpiricalVariogram ev =
            empirical_variogram(sites, site_values, config.variogram_bins);
        model = fit_spherical(ev.lag_km, ev.semivariance);
      }
      Eigen::MatrixXd map =
          rasterize_variable(sites, site_values, config.grid, model);

      float* dst = stack.maps.data() +
                   (static_cast<Index>(lag) * n_variables + var) * rows * cols;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          dst[r * cols + c] = static_cast<float>(map(r, c));
    }
  }
  return stack;
}

}  // namespace nowcast
