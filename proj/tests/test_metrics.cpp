#include "nowcast/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace nowcast;

namespace {

/// Independent scoring straight from the textbook formulas.
Scores brute_force(const ContingencyCounts& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  Scores s;
  s.f1 = 2 * tp / (2 * tp + fp + fn);
  s.csi = tp / (tp + fp + fn);
  s.hss = 2 * (tp * tn - fp * fn) /
          ((tp + fn) * (fn + tn) + (tp + fp) * (fp + tn));
  s.mcc = (tp * tn - fp * fn) /
          std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  return s;
}

}  // namespace

TEST_CASE("hand-derived contingency case") {
  ContingencyCounts c;
  c.tp = 3;
  c.fp = 1;
  c.fn = 2;
  c.tn = 4;
  const Scores s = score(c);
  CHECK(s.f1 == doctest::Approx(0.666667).epsilon(1e-5));
  CHECK(s.csi == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.hss == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(s.mcc == doctest::Approx(0.408248).epsilon(1e-5));
  CHECK(!s.undefined);
}

TEST_CASE("scores match the brute-force oracle on random masks") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> uval(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::MatrixXd pred(16, 16), tgt(16, 16);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        pred(i, j) = uval(rng);
        tgt(i, j) = uval(rng);
      }
    ContingencyCounts c;
    accumulate(binarize(pred, 1.0), binarize(tgt, 1.0), c);
    const Scores got = score(c);
    const Scores want = brute_force(c);
    CHECK(std::abs(got.f1 - want.f1) < 1e-12);
    CHECK(std::abs(got.csi - want.csi) < 1e-12);
    CHECK(std::abs(got.hss - want.hss) < 1e-12);
    CHECK(std::abs(got.mcc - want.mcc) < 1e-12);
  }
}

TEST_CASE("binarize uses strict exceedance") {
  Eigen::MatrixXd g(1, 3);
  g << 0.5, 0.500000001, 0.499999999;
  const auto mask = binarize(g, 0.5);
  CHECK(mask[0] == 0);  // equality is not exceedance
  CHECK(mask[1] == 1);
  CHECK(mask[2] == 0);
  CHECK_THROWS_AS(binarize(g, -0.1), std::invalid_argument);
}

TEST_CASE("MCC and HSS are symmetric under pred/target swap") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> uval(0.0, 2.0);
  Eigen::MatrixXd pred(8, 8), tgt(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      pred(i, j) = uval(rng);
      tgt(i, j) = uval(rng);
    }
  ContingencyCounts ab, ba;
  accumulate(binarize(pred, 1.0), binarize(tgt, 1.0), ab);
  accumulate(binarize(tgt, 1.0), binarize(pred, 1.0), ba);
  CHECK(score(ab).mcc == doctest::Approx(score(ba).mcc).epsilon(1e-12));
  CHECK(score(ab).hss == doctest::Approx(score(ba).hss).epsilon(1e-12));
}

TEST_CASE("aggregate-then-score equals score-on-concatenation") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> uval(0.0, 2.0);
  ContingencyCounts merged, whole;
  Eigen::MatrixXd all_pred(4, 64), all_tgt(4, 64);
  for (int part = 0; part < 4; ++part) {
    Eigen::MatrixXd pred(1, 64), tgt(1, 64);
    for (int j = 0; j < 64; ++j) {
      pred(0, j) = uval(rng);
      tgt(0, j) = uval(rng);
    }
    all_pred.row(part) = pred;
    all_tgt.row(part) = tgt;
    ContingencyCounts c;
    accumulate(binarize(pred, 1.0), binarize(tgt, 1.0), c);
    merged += c;
  }
  accumulate(binarize(all_pred, 1.0), binarize(all_tgt, 1.0), whole);
  CHECK(merged.tp == whole.tp);
  CHECK(merged.fp == whole.fp);
  CHECK(merged.tn == whole.tn);
  CHECK(merged.fn == whole.fn);
  CHECK(score(merged).f1 == doctest::Approx(score(whole).f1).epsilon(1e-15));
}

TEST_CASE("degenerate denominators report zero with the undefined flag") {
  ContingencyCounts c;
  c.tn = 100;  // nothing positive anywhere
  const Scores s = score(c);
  CHECK(s.undefined);
  CHECK(s.f1 == 0.0);
  CHECK(s.csi == 0.0);
  CHECK(s.mcc == 0.0);
}

TEST_CASE("metric report renders one table row per threshold") {
  MetricReport r;
  r.model_id = "demo";
  for (double t : kDefaultThresholdsMmh) {
    ThresholdScores ts;
    ts.threshold_mmh = t;
    r.per_threshold.push_back(ts);
  }
  const std::string table = r.to_table();
  size_t rows = 0;
  for (char ch : table)
    if (ch == '\n') ++rows;
  CHECK(rows == kDefaultThresholdsMmh.size() + 1);  // header + rows
}
