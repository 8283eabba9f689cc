#include "nowcast/variogram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nowcast {

EmpiricalVariogram empirical_variogram(const std::vector<LatLon>& sites,
                                       const std::vector<double>& values,
                                       int n_bins) {
  if (sites.size() != values.size())
    throw std::invalid_argument("empirical_variogram: size mismatch");
  if (n_bins < 1) throw std::invalid_argument("empirical_variogram: n_bins < 1");

  const size_t m = sites.size();
  std::vector<double> dist;
  std::vector<double> gamma;
  double dmax = 0.0;
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = i + 1; j < m; ++j) {
      double d = great_circle_distance(sites[i], sites[j]);
      dist.push_back(d);
      gamma.push_back(0.5 * (values[i] - values[j]) * (values[i] - values[j]));
      dmax = std::max(dmax, d);
    }
  }
  if (dist.empty() || dmax <= 0.0)
    throw std::invalid_argument("empirical_variogram: fewer than 2 distinct sites");

  std::vector<double> sum(n_bins, 0.0);
  std::vector<int> cnt(n_bins, 0);
  for (size_t k = 0; k < dist.size(); ++k) {
    int b = std::min(n_bins - 1, static_cast<int>(dist[k] / dmax * n_bins));
    sum[b] += gamma[k];
    cnt[b] += 1;
  }

  EmpiricalVariogram ev;
  ev.max_distance_km = dmax;
  for (int b = 0; b < n_bins; ++b) {
    if (cnt[b] == 0) continue;
    ev.lag_km.push_back((b + 0.5) * dmax / n_bins);
    ev.semivariance.push_back(sum[b] / cnt[b]);
    ev.pair_count.push_back(cnt[b]);
  }
  return ev;
}

namespace {

double unit_spherical(double h, double r) {
  if (h <= 0.0) return 0.0;
  if (h >= r) return 1.0;
  double u = h / r;
  return 1.5 * u - 0.5 * u * u * u;
}

struct LinFit {
  double nugget, psill, sse;
};

// For fixed range the model is linear in (nugget, psill); solve the
// nonnegative 2-variable least squares by enumerating the KKT cases.
LinFit fit_linear_part(const std::vector<double>& lags,
                       const std::vector<double>& y, double r) {
  const size_t n = lags.size();
  double sff = 0, sf1 = 0, s11 = static_cast<double>(n), sfy = 0, s1y = 0;
  std::vector<double> f(n);
  for (size_t i = 0; i < n; ++i) {
    f[i] = unit_spherical(lags[i], r);
    sff += f[i] * f[i];
    sf1 += f[i];
    sfy += f[i] * y[i];
    s1y += y[i];
  }
  auto sse_of = [&](double nn, double ss) {
    double e = 0;
    for (size_t i = 0; i < n; ++i) {
      double d = y[i] - (nn + ss * f[i]);
      e += d * d;
    }
    return e;
  };

  LinFit best{0.0, 0.0, sse_of(0.0, 0.0)};
  auto consider = [&](double nn, double ss) {
    if (nn < 0.0 || ss < 0.0 || !std::isfinite(nn) || !std::isfinite(ss)) return;
    double e = sse_of(nn, ss);
    if (e < best.sse) best = {nn, ss, e};
  };

  double det = s11 * sff - sf1 * sf1;
  if (std::abs(det) > 1e-30)
    consider((s1y * sff - sf1 * sfy) / det, (s11 * sfy - sf1 * s1y) / det);
  if (sff > 1e-30) consider(0.0, sfy / sff);
  if (n > 0) consider(s1y / s11, 0.0);
  return best;
}

}  // namespace

VariogramModel fit_spherical(const std::vector<double>& lags,
                             const std::vector<double>& semivariances) {
  if (lags.size() != semivariances.size() || lags.empty())
    throw std::invalid_argument("fit_spherical: empty or mismatched input");

  const double max_lag = *std::max_element(lags.begin(), lags.end());
  if (max_lag <= 0.0) throw std::invalid_argument("fit_spherical: nonpositive lags");

  VariogramModel model;
  model.n_bins = static_cast<int>(lags.size());

  double ymax = 0.0;
  for (double y : semivariances) ymax = std::max(ymax, std::abs(y));
  if (ymax < 1e-12) {  // constant field
    model.range_km = max_lag;
    return model;
  }

  const double r_hi = 1.5 * max_lag;
  auto sse_at = [&](double r) { return fit_linear_part(lags, semivariances, r).sse; };

  // Coarse scan over the admissible range, then golden-section refinement
  // around the best cell.
  const int kGrid = 256;
  double best_r = r_hi, best_sse = sse_at(r_hi);
  for (int i = 1; i <= kGrid; ++i) {
    double r = r_hi * i / kGrid;
    double e = sse_at(r);
    if (e < best_sse) {
      best_sse = e;
      best_r = r;
    }
  }
  double lo = std::max(1e-9 * r_hi, best_r - r_hi / kGrid);
  double hi = std::min(r_hi, best_r + r_hi / kGrid);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = sse_at(x1), f2 = sse_at(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-12 * r_hi; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = sse_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = sse_at(x2);
    }
  }
  best_r = 0.5 * (a + b);

  LinFit lf = fit_linear_part(lags, semivariances, best_r);
  model.nugget = lf.nugget;
  model.partial_sill = lf.psill;
  model.range_km = best_r;
  model.residual_norm = std::sqrt(lf.sse);
  return model;
}

}  // namespace nowcast
