#include "nowcast/pipeline.hpp"

#include "nowcast/metrics.hpp"
#include "nowcast/radar_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace nowcast {

Grid crop_and_resize(const Grid& raw) {
  if (raw.rows() < kRawGridSize || raw.cols() < kRawGridSize)
    throw std::invalid_argument("crop_and_resize: raw grid smaller than 288x288");
  if ((raw.array() < 0.0f).any())
    throw std::invalid_argument("crop_and_resize: negative input values");

  const Eigen::Index r0 = (raw.rows() - kRawGridSize) / 2;
  const Eigen::Index c0 = (raw.cols() - kRawGridSize) / 2;
  const double factor = static_cast<double>(kRawGridSize) / kGridSize;  // 4.5

  Grid out(kGridSize, kGridSize);
  for (int i = 0; i < kGridSize; ++i) {
    const double y0 = i * factor, y1 = (i + 1) * factor;
    for (int j = 0; j < kGridSize; ++j) {
      const double x0 = j * factor, x1 = (j + 1) * factor;
      double acc = 0.0, wsum = 0.0;
      for (int sy = static_cast<int>(y0); sy < static_cast<int>(std::ceil(y1)); ++sy) {
        const double wy = std::min<double>(y1, sy + 1) - std::max<double>(y0, sy);
        for (int sx = static_cast<int>(x0); sx < static_cast<int>(std::ceil(x1)); ++sx) {
          const double wx = std::min<double>(x1, sx + 1) - std::max<double>(x0, sx);
          acc += wy * wx * raw(r0 + sy, c0 + sx);
          wsum += wy * wx;
        }
      }
      out(i, j) = static_cast<float>(acc / wsum);
    }
  }
  return out;
}

Grid normalize_precip(const Grid& grid_mm, std::int64_t* clamp_warnings) {
  Grid out = grid_mm;
  const float maxv = static_cast<float>(kPrecipMaxMm);
  std::int64_t clamped = 0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out.data()[i] > maxv) {
      out.data()[i] = maxv;
      ++clamped;
    }
  }
  if (clamped && clamp_warnings) *clamp_warnings += clamped;
  out /= maxv;
  return out;
}

double rain_fraction(const Grid& g) {
  Eigen::Index pos = (g.array() > 0.0f).count();
  return static_cast<double>(pos) / static_cast<double>(g.size());
}

bool rain_fraction_keep(const Grid& filter_frame, double min_fraction) {
  return rain_fraction(filter_frame) >= min_fraction;
}

std::optional<StationTensor> align_station_records(
    const std::vector<TimePoint>& radar_timestamps, const StationCorpus& corpus) {
  if (radar_timestamps.size() != kNumLags)
    throw std::invalid_argument("align_station_records: expected 12 timestamps");
  if (static_cast<int>(corpus.stations.size()) != kNumStations)
    throw std::invalid_argument("align_station_records: corpus must have 22 stations");

  StationTensor t;
  for (int lag = 0; lag < kNumLags; ++lag) {
    const TimePoint ts = floor_to_10min(radar_timestamps[static_cast<size_t>(lag)]);
    for (int s = 0; s < kNumStations; ++s) {
      const StationObservation* obs = corpus.record_at(s, ts);
      if (!obs) return std::nullopt;
      for (int v = 0; v < kNumVariables; ++v) {
        const auto& val = obs->values[static_cast<size_t>(v)];
        if (!val) return std::nullopt;  // partially missing record
        t.at(s, v, lag) = *val;
      }
    }
  }
  return t;
}

StationTensor standardize_station(const StationTensor& raw,
                                  const StandardizationStats& stats) {
  StationTensor out;
  for (int s = 0; s < kNumStations; ++s)
    for (int v = 0; v < kNumVariables; ++v)
      for (int lag = 0; lag < kNumLags; ++lag) {
        const size_t vi = static_cast<size_t>(v);
        out.at(s, v, lag) =
            stats.zero_variance[vi]
                ? 0.0
                : (raw.at(s, v, lag) - stats.mean[vi]) / stats.stddev[vi];
      }
  out.standardized = true;
  return out;
}

StandardizationStats compute_standardization(
    const std::vector<const StationTensor*>& train_tensors) {
  StandardizationStats stats;
  for (int v = 0; v < kNumVariables; ++v) {
    double sum = 0.0, sum2 = 0.0;
    std::int64_t n = 0;
    for (const StationTensor* t : train_tensors) {
      for (int s = 0; s < kNumStations; ++s)
        for (int lag = 0; lag < kNumLags; ++lag) {
          double x = t->at(s, v, lag);
          sum += x;
          sum2 += x * x;
          ++n;
        }
    }
    const size_t vi = static_cast<size_t>(v);
    if (n == 0) {
      stats.zero_variance[vi] = true;
      stats.stddev[vi] = 1.0;
      continue;
    }
    double mean = sum / n;
    double var = std::max(0.0, sum2 / n - mean * mean);
    stats.mean[vi] = mean;
    stats.stddev[vi] = std::sqrt(var);
    if (stats.stddev[vi] < 1e-12) {
      stats.zero_variance[vi] = true;
      stats.stddev[vi] = 1.0;
    }
  }
  return stats;
}

const RadarFrame* Corpus::frame_at(TimePoint t) const {
  auto it = radar_index.find(t);
  if (it == radar_index.end()) return nullptr;
  return &radar[it->second];
}

Corpus Corpus::load(const std::string& root) {
  Corpus c;
  c.radar = read_radar_corpus(root);
  c.stations = read_station_corpus(root + "/stations.csv");
  for (size_t i = 0; i < c.radar.size(); ++i)
    c.radar_index[c.radar[i].timestamp] = i;
  return c;
}

DatasetManifest build_manifest(const std::string& corpus_root,
                               const ManifestConfig& config) {
  Corpus corpus = Corpus::load(corpus_root);

  DatasetManifest m;
  m.seed = config.seed;
  m.filter_threshold = config.filter_threshold;
  m.filter_frame = config.filter_frame;
  if (config.filter_frame != "target" && config.filter_frame != "last_input")
    throw std::invalid_argument("build_manifest: filter_frame must be 'target' or 'last_input'");

  struct Candidate {
    SampleRef ref;
    StationTensor raw_station;
  };
  std::vector<Candidate> kept;

  // slide a 12-frame window with the +30-minute target over the timeline
  for (size_t i = 0; i + kNumLags - 1 < corpus.radar.size(); ++i) {
    bool contiguous = true;
    for (int k = 1; k < kNumLags; ++k) {
      if (corpus.radar[i + static_cast<size_t>(k)].timestamp !=
          corpus.radar[i].timestamp + k * kRadarStepSec) {
        contiguous = false;
        break;
      }
    }
    if (!contiguous) continue;
    const RadarFrame& last = corpus.radar[i + kNumLags - 1];
    const RadarFrame* target = corpus.frame_at(last.timestamp + kLeadSteps * kRadarStepSec);
    if (!target) continue;
    ++m.candidates;

    const Grid& filter_frame =
        config.filter_frame == "target" ? target->grid : last.grid;
    if (!rain_fraction_keep(filter_frame, config.filter_threshold)) {
      ++m.dropped_by_filter;
      continue;
    }

    std::vector<TimePoint> input_times(kNumLags);
    for (int k = 0; k < kNumLags; ++k)
      input_times[static_cast<size_t>(k)] =
          corpus.radar[i].timestamp + k * kRadarStepSec;
    auto station = align_station_records(input_times, corpus.stations);
    if (!station) {
      ++m.dropped_by_alignment;
      continue;
    }

    Candidate c;
    c.ref.id = format_utc(last.timestamp);
    c.ref.first_input = corpus.radar[i].timestamp;
    c.ref.target_time = target->timestamp;
    c.ref.split = utc_year(target->timestamp) >= config.test_year
                      ? Split::kTest
                      : Split::kTrain;
    c.raw_station = std::move(*station);
    kept.push_back(std::move(c));
  }

  // carve 10% of the training samples into validation, seed-deterministic
  std::vector<size_t> train_idx;
  for (size_t i = 0; i < kept.size(); ++i)
    if (kept[i].ref.split == Split::kTrain) train_idx.push_back(i);
  std::mt19937_64 rng(static_cast<std::uint64_t>(config.seed));
  std::shuffle(train_idx.begin(), train_idx.end(), rng);
  const size_t n_val = train_idx.size() / 10;
  for (size_t k = 0; k < n_val; ++k)
    kept[train_idx[k]].ref.split = Split::kValidation;

  // standardization statistics from the training remainder only
  std::vector<const StationTensor*> train_tensors;
  for (const auto& c : kept)
    if (c.ref.split == Split::kTrain) train_tensors.push_back(&c.raw_station);
  if (!train_tensors.empty())
    m.stats = compute_standardization(train_tensors);
  else
    for (auto& z : m.stats.zero_variance) z = true;

  for (auto& c : kept) m.samples.push_back(c.ref);
  std::sort(m.samples.begin(), m.samples.end(),
            [](const SampleRef& a, const SampleRef& b) {
              return a.first_input < b.first_input;
            });
  return m;
}

MaterializedSample materialize_sample(const Corpus& corpus,
                                      const SampleRef& ref,
                                      const StandardizationStats& stats) {
  MaterializedSample s;
  std::vector<TimePoint> input_times(kNumLags);
  for (int k = 0; k < kNumLags; ++k) {
    TimePoint t = ref.first_input + k * kRadarStepSec;
    input_times[static_cast<size_t>(k)] = t;
    const RadarFrame* f = corpus.frame_at(t);
    if (!f) throw std::runtime_error("materialize_sample: missing frame " + format_utc(t));
    s.inputs.push_back(normalize_precip(crop_and_resize(f->grid)));
  }
  const RadarFrame* target = corpus.frame_at(ref.target_time);
  if (!target)
    throw std::runtime_error("materialize_sample: missing target frame");
  s.target = normalize_precip(crop_and_resize(target->grid));

  auto station = align_station_records(input_times, corpus.stations);
  if (!station)
    throw std::runtime_error("materialize_sample: station alignment lost for " + ref.id);
  s.station = standardize_station(*station, stats);
  return s;
}

}  // namespace nowcast
