#pragma once

#include "nowcast/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace nowcast {

/// Normalization constant: maximum precipitation value in the dataset (mm).
inline constexpr double kPrecipMaxMm = 47.83;

/// Radar frames are 5-minute accumulations; rate conversion to mm/h.
inline constexpr double kAccumToRate = 12.0;

/// Pixel-wise confusion totals for one threshold, accumulated over a set.
struct ContingencyCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold_mmh = 0.0;
  std::int64_t samples = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }

  ContingencyCounts& operator+=(const ContingencyCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    samples += o.samples;
    return *this;
  }
};

struct Scores {
  double f1 = 0.0, csi = 0.0, hss = 0.0, mcc = 0.0;
  bool undefined = false;  // some denominator was zero; values sentinel 0
};

/// Binary mask by strict exceedance: 1 where value > threshold.
std::vector<std::uint8_t> binarize(const Eigen::MatrixXd& grid_mmh,
                                   double threshold_mmh);

/// Adds the pixel-wise confusion of one mask pair into counts.
void accumulate(const std::vector<std::uint8_t>& pred,
                const std::vector<std::uint8_t>& target,
                ContingencyCounts& counts);

/// CSI, HSS, MCC per the aggregated contingency formulas plus F1.
/// Zero denominators yield 0 with the undefined flag set.
Scores score(const ContingencyCounts& counts);

struct ThresholdScores {
  double threshold_mmh;
  Scores scores;
  ContingencyCounts counts;
};

struct MetricReport {
  std::string model_id;
  std::string dataset_id;
  double mse_mm2 = 0.0;  // per-pixel MSE on denormalized 5-min depths
  std::int64_t samples = 0;
  std::vector<ThresholdScores> per_threshold;

  std::string to_text() const;
  std::string to_table() const;  // delimiter-separated, one row per threshold
};

inline const std::vector<double> kDefaultThresholdsMmh = {0.5, 10.0, 20.0};

}  // namespace nowcast
