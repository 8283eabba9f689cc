#include "nowcast/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nowcast {

std::vector<std::uint8_t> binarize(const Eigen::MatrixXd& grid_mmh,
                                   double threshold_mmh) {
  if (threshold_mmh < 0.0)
    throw std::invalid_argument("binarize: negative threshold");
  std::vector<std::uint8_t> mask(static_cast<size_t>(grid_mmh.size()));
  const double* p = grid_mmh.data();
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = p[i] > threshold_mmh ? 1 : 0;
  return mask;
}

void accumulate(const std::vector<std::uint8_t>& pred,
                const std::vector<std::uint8_t>& target,
                ContingencyCounts& counts) {
  if (pred.size() != target.size())
    throw std::invalid_argument("accumulate: mask shape mismatch");
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) {
      if (target[i])
        ++tp;
      else
        ++fp;
    } else {
      if (target[i])
        ++fn;
      else
        ++tn;
    }
  }
  counts.tp += tp;
  counts.fp += fp;
  counts.tn += tn;
  counts.fn += fn;
  counts.samples += 1;
}

Scores score(const ContingencyCounts& c) {
  Scores s;
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);

  double csi_den = tp + fp + fn;
  if (csi_den > 0) {
    s.csi = tp / csi_den;
    s.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
  } else {
    s.undefined = true;
  }

  double hss_den = (tp + fn) * (fn + tn) + (tp + fp) * (fp + tn);
  if (hss_den > 0)
    s.hss = 2.0 * (tp * tn - fp * fn) / hss_den;
  else
    s.undefined = true;

  double mcc_den =
      std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  if (mcc_den > 0)
    s.mcc = (tp * tn - fp * fn) / mcc_den;
  else
    s.undefined = true;

  return s;
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "model: " << model_id << "\n";
  out << "dataset: " << dataset_id << "\n";
  out << "samples: " << samples << "\n";
  out << "mse_mm2: " << mse_mm2 << "\n";
  for (const auto& t : per_threshold) {
    out << "threshold " << t.threshold_mmh << " mm/h:"
        << " F1=" << t.scores.f1 << " CSI=" << t.scores.csi
        << " HSS=" << t.scores.hss << " MCC=" << t.scores.mcc
        << " TP=" << t.counts.tp << " FP=" << t.counts.fp
        << " TN=" << t.counts.tn << " FN=" << t.counts.fn
        << (t.scores.undefined ? " undefined=1" : "") << "\n";
  }
  return out.str();
}

std::string MetricReport::to_table() const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "model\tthreshold_mmh\tmse\tf1\tcsi\thss\tmcc\tundefined\n";
  for (const auto& t : per_threshold) {
    out << model_id << "\t" << t.threshold_mmh << "\t" << mse_mm2 << "\t"
        << t.scores.f1 << "\t" << t.scores.csi << "\t" << t.scores.hss << "\t"
        << t.scores.mcc << "\t" << (t.scores.undefined ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace nowcast
