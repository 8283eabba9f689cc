#pragma once

#include "nowcast/dataset.hpp"
#include "nowcast/metrics.hpp"
#include "nowcast/models.hpp"

#include <string>
#include <vector>

namespace nowcast {

struct EvalConfig {
  std::vector<double> thresholds_mmh = kDefaultThresholdsMmh;
  Index batch_size = 16;
};

/// Full-set evaluation: predictions are denormalized to 5-minute depths
/// (clamped at zero), converted to mm/h, and scored against the targets at
/// each threshold with aggregated contingency counts. The report's MSE is
/// on the denormalized depths.
MetricReport evaluate_model(Model& model, const Dataset& data,
                            const EvalConfig& config);

/// Inference-time knockout of one station variable: zeroes the variable's
/// standardized slice in the station tensor and its lagged channels in the
/// kriged stack before the forward pass.
struct AblationEntry {
  std::string variable;
  double f1_ablated = 0.0;
  double f1_delta = 0.0;         // baseline minus ablated
  double contribution_pct = 0.0; // delta / baseline * 100
};

struct AblationResult {
  double threshold_mmh = 0.0;
  double baseline_f1 = 0.0;
  std::vector<AblationEntry> entries;  // sorted by descending delta

  std::string to_text() const;
};

AblationResult ablate_variables(Model& model, const Dataset& data,
                                const EvalConfig& config, double threshold_mmh);

/// Contribution of a knocked-out variable as a percentage of the
/// baseline score: (baseline - ablated) / baseline * 100.
double ablation_contribution_pct(double baseline_f1, double ablated_f1);

}  // namespace nowcast
