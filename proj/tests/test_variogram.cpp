#include "nowcast/variogram.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace nowcast;

TEST_CASE("spherical model evaluates the textbook formula") {
  VariogramModel m{0.2, 0.8, 100.0};
  CHECK(m(0.0) == doctest::Approx(0.2));          // nugget at the origin
  CHECK(m(100.0) == doctest::Approx(1.0));        // sill at the range
  CHECK(m(250.0) == doctest::Approx(1.0));        // flat beyond the range
  CHECK(m(50.0) == doctest::Approx(0.2 + 0.8 * (1.5 * 0.5 - 0.5 * 0.125)));
}

TEST_CASE("empirical variogram matches a brute-force oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ulat(51.4, 52.7), ulon(4.4, 6.6),
      uval(0.0, 10.0);
  std::vector<LatLon> sites;
  std::vector<double> values;
  for (int i = 0; i < 12; ++i) {
    sites.push_back({ulat(rng), ulon(rng)});
    values.push_back(uval(rng));
  }
  const int n_bins = 6;
  EmpiricalVariogram ev = empirical_variogram(sites, values, n_bins);

  // independent re-binning
  double dmax = 0.0;
  for (size_t i = 0; i < sites.size(); ++i)
    for (size_t j = i + 1; j < sites.size(); ++j)
      dmax = std::max(dmax, great_circle_distance(sites[i], sites[j]));
  std::vector<double> sum(n_bins, 0.0);
  std::vector<int> cnt(n_bins, 0);
  for (size_t i = 0; i < sites.size(); ++i)
    for (size_t j = i + 1; j < sites.size(); ++j) {
      const double d = great_circle_distance(sites[i], sites[j]);
      int b = std::min(n_bins - 1, static_cast<int>(d / dmax * n_bins));
      sum[static_cast<size_t>(b)] +=
          0.5 * (values[i] - values[j]) * (values[i] - values[j]);
      cnt[static_cast<size_t>(b)] += 1;
    }
  CHECK(ev.max_distance_km == doctest::Approx(dmax));
  size_t k = 0;
  for (int b = 0; b < n_bins; ++b) {
    if (cnt[static_cast<size_t>(b)] == 0) continue;  // empty bins omitted
    REQUIRE(k < ev.lag_km.size());
    CHECK(ev.pair_count[k] == cnt[static_cast<size_t>(b)]);
    CHECK(ev.semivariance[k] ==
          doctest::Approx(sum[static_cast<size_t>(b)] / cnt[static_cast<size_t>(b)]));
    ++k;
  }
  CHECK(k == ev.lag_km.size());
}

TEST_CASE("fit recovers (0, 1, 100) from noiseless samples") {
  const VariogramModel truth{0.0, 1.0, 100.0};
  std::vector<double> lags, gammas;
  for (double h = 5.0; h <= 150.0; h += 5.0) {
    lags.push_back(h);
    gammas.push_back(truth(h));
  }
  const VariogramModel fit = fit_spherical(lags, gammas);
  CHECK(std::abs(fit.nugget) < 1e-3);
  CHECK(std::abs(fit.partial_sill - 1.0) < 1e-3);
  CHECK(std::abs(fit.range_km - 100.0) / 100.0 < 1e-3);
}

TEST_CASE("fit recovers a model with nugget") {
  const VariogramModel truth{0.3, 0.7, 60.0};
  std::vector<double> lags, gammas;
  for (double h = 2.0; h <= 90.0; h += 2.0) {
    lags.push_back(h);
    gammas.push_back(truth(h));
  }
  const VariogramModel fit = fit_spherical(lags, gammas);
  CHECK(std::abs(fit.nugget - 0.3) < 1e-3);
  CHECK(std::abs(fit.partial_sill - 0.7) < 1e-3);
  CHECK(std::abs(fit.range_km - 60.0) / 60.0 < 1e-3);
}

TEST_CASE("constant field collapses to the sentinel model") {
  std::vector<double> lags = {10.0, 20.0, 30.0};
  std::vector<double> gammas = {0.0, 0.0, 0.0};
  const VariogramModel fit = fit_spherical(lags, gammas);
  CHECK(fit.is_sentinel());
  // sentinel evaluates to zero everywhere
  CHECK(fit(15.0) == doctest::Approx(0.0));
}

TEST_CASE("fitted parameters respect the bound constraints") {
  // decreasing semivariances push the unconstrained fit negative
  std::vector<double> lags = {10.0, 20.0, 30.0, 40.0};
  std::vector<double> gammas = {1.0, 0.6, 0.3, 0.1};
  const VariogramModel fit = fit_spherical(lags, gammas);
  CHECK(fit.nugget >= 0.0);
  CHECK(fit.partial_sill >= 0.0);
  CHECK(fit.range_km > 0.0);
  CHECK(fit.range_km <= 1.5 * 40.0 + 1e-9);
}
