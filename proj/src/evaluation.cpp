#include "nowcast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace nowcast {

namespace {

constexpr Index kPix = kGridSize * kGridSize;

/// Zeroes variable v in a batch: the (station, v, lag) slice of the
/// station tensor and the lag-major channels lag*kNumVariables + v of the
/// kriged stack.
void knock_out_variable(ForwardBatch& batch, int v) {
  if (!batch.station.empty()) {
    const Index B = batch.station.dim(0);
    for (Index n = 0; n < B; ++n)
      for (Index s = 0; s < kNumStations; ++s) {
        float* base = batch.station.data() +
                      ((n * kNumStations + s) * kNumVariables + v) * kNumLags;
        std::fill(base, base + kNumLags, 0.0f);
      }
  }
  if (!batch.krige.empty()) {
    const Index B = batch.krige.dim(0);
    const Index C = batch.krige.dim(1);
    for (Index n = 0; n < B; ++n)
      for (Index lag = 0; lag < kNumLags; ++lag) {
        const Index c = lag * kNumVariables + v;
        float* base = batch.krige.data() + (n * C + c) * kPix;
        std::fill(base, base + kPix, 0.0f);
      }
  }
}

Eigen::MatrixXd to_mmh(const float* normalized, Index n) {
  Eigen::MatrixXd out(n, 1);
  for (Index i = 0; i < n; ++i) {
    const double depth = std::max(0.0, static_cast<double>(normalized[i]) * kPrecipMaxMm);
    out(i, 0) = depth * kAccumToRate;
  }
  return out;
}

struct EvalAccumulator {
  std::vector<ContingencyCounts> counts;
  double se_sum = 0.0;  // squared error on denormalized depths
  std::int64_t pixels = 0;
  std::int64_t samples = 0;

  explicit EvalAccumulator(const std::vector<double>& thresholds) {
    for (double t : thresholds) {
      ContingencyCounts c;
      c.threshold_mmh = t;
      counts.push_back(c);
    }
  }

  void add(const Tensor& pred, const Tensor& target,
           const std::vector<double>& thresholds) {
    const Index B = pred.dim(0);
    for (Index n = 0; n < B; ++n) {
      const Eigen::MatrixXd pred_mmh = to_mmh(pred.data() + n * kPix, kPix);
      const Eigen::MatrixXd tgt_mmh = to_mmh(target.data() + n * kPix, kPix);
      for (size_t t = 0; t < thresholds.size(); ++t) {
        auto pm = binarize(pred_mmh, thresholds[t]);
        auto tm = binarize(tgt_mmh, thresholds[t]);
        accumulate(pm, tm, counts[t]);
        ++counts[t].samples;
      }
      for (Index i = 0; i < kPix; ++i) {
        const double d = pred_mmh(i, 0) / kAccumToRate - tgt_mmh(i, 0) / kAccumToRate;
        se_sum += d * d;
      }
      pixels += kPix;
      ++samples;
    }
  }
};

template <typename BatchTransform>
MetricReport run_eval(Model& model, const Dataset& data,
                      const EvalConfig& config, BatchTransform&& transform) {
  if (data.size() == 0) throw std::runtime_error("evaluate_model: empty dataset");
  const bool ws = model.wants_station(), wk = model.wants_krige();
  EvalAccumulator acc(config.thresholds_mmh);
  std::vector<size_t> idx;
  for (size_t start = 0; start < data.size();
       start += static_cast<size_t>(config.batch_size)) {
    idx.clear();
    for (size_t i = start;
         i < std::min(data.size(), start + static_cast<size_t>(config.batch_size)); ++i)
      idx.push_back(i);
    ForwardBatch b = data.batch(idx, ws, wk);
    transform(b);
    Tensor pred = model.forward(b, /*training=*/false);
    acc.add(pred, b.target, config.thresholds_mmh);
  }

  MetricReport report;
  report.model_id = model.name();
  report.samples = acc.samples;
  report.mse_mm2 = acc.se_sum / static_cast<double>(acc.pixels);
  for (const ContingencyCounts& c : acc.counts) {
    ThresholdScores ts;
    ts.threshold_mmh = c.threshold_mmh;
    ts.counts = c;
    ts.scores = score(c);
    report.per_threshold.push_back(ts);
  }
  return report;
}

double f1_at(const MetricReport& report, double threshold) {
  for (const ThresholdScores& ts : report.per_threshold)
    if (ts.threshold_mmh == threshold) return ts.scores.f1;
  throw std::logic_error("f1_at: threshold not evaluated");
}

}  // namespace

MetricReport evaluate_model(Model& model, const Dataset& data,
                            const EvalConfig& config) {
  return run_eval(model, data, config, [](ForwardBatch&) {});
}

AblationResult ablate_variables(Model& model, const Dataset& data,
                                const EvalConfig& config, double threshold_mmh) {
  if (!model.wants_station() && !model.wants_krige())
    throw std::invalid_argument("ablate_variables: model '" + model.name() +
                                "' consumes no station data");
  EvalConfig single = config;
  single.thresholds_mmh = {threshold_mmh};

  AblationResult result;
  result.threshold_mmh = threshold_mmh;
  result.baseline_f1 = f1_at(evaluate_model(model, data, single), threshold_mmh);

  for (int v = 0; v < kNumVariables; ++v) {
    MetricReport r = run_eval(model, data, single,
                              [v](ForwardBatch& b) { knock_out_variable(b, v); });
    AblationEntry e;
    e.variable = kVariableNames[static_cast<size_t>(v)];
    e.f1_ablated = f1_at(r, threshold_mmh);
    e.f1_delta = result.baseline_f1 - e.f1_ablated;
    e.contribution_pct = ablation_contribution_pct(result.baseline_f1, e.f1_ablated);
    result.entries.push_back(e);
  }
  std::stable_sort(result.entries.begin(), result.entries.end(),
                   [](const AblationEntry& a, const AblationEntry& b) {
                     return a.f1_delta > b.f1_delta;
                   });
  return result;
}

double ablation_contribution_pct(double baseline_f1, double ablated_f1) {
  if (baseline_f1 == 0.0) return 0.0;
  return (baseline_f1 - ablated_f1) / baseline_f1 * 100.0;
}

std::string AblationResult::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "variable knockout at " << std::setprecision(1) << threshold_mmh
      << " mm/h, baseline F1 " << std::setprecision(4) << baseline_f1 << "\n";
  out << "variable | F1 ablated | delta F1 | contribution %\n";
  for (const AblationEntry& e : entries)
    out << e.variable << " | " << e.f1_ablated << " | " << e.f1_delta << " | "
        << std::setprecision(2) << e.contribution_pct << std::setprecision(4)
        << "\n";
  return out.str();
}

}  // namespace nowcast
