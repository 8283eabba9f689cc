#include "nowcast/synthetic.hpp"

#include "nowcast/radar_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <stdexcept>

namespace nowcast {

namespace {

std::mt19937_64 day_rng(const SyntheticConfig& config, int day_index) {
  return std::mt19937_64(static_cast<std::uint64_t>(config.seed) * 0x9e3779b97f4a7c15ULL +
                         static_cast<std::uint64_t>(day_index) + 1);
}

TimePoint day_start(const SyntheticConfig& config, int day_index) {
  if (day_index < config.train_days)
    return make_utc(config.train_year, 1, 1) + static_cast<TimePoint>(day_index) * 86400;
  return make_utc(config.test_year, 1, 1) +
         static_cast<TimePoint>(day_index - config.train_days) * 86400;
}

}  // namespace

std::vector<BlobTruth> synthetic_blob_truth(const SyntheticConfig& config,
                                            int day_index) {
  if (config.blobs < 0)
    throw std::invalid_argument("synthetic: negative blob count");
  auto rng = day_rng(config, day_index);
  std::uniform_real_distribution<double> upos(60.0, 228.0);
  std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> usig(0.7, 1.3);
  std::uniform_real_distribution<double> uamp(0.5, 1.0);
  std::vector<BlobTruth> blobs;
  for (int b = 0; b < config.blobs; ++b) {
    BlobTruth t;
    t.x0 = upos(rng);
    t.y0 = upos(rng);
    double ang = uang(rng);
    t.vx = config.advection_px_per_step * std::cos(ang);
    t.vy = config.advection_px_per_step * std::sin(ang);
    t.sigma = config.blob_sigma_px * usig(rng);
    t.amplitude = config.blob_amplitude_mm * uamp(rng);
    blobs.push_back(t);
  }
  return blobs;
}

Grid synthetic_raw_frame(const SyntheticConfig& config, int day_index, int step) {
  auto blobs = synthetic_blob_truth(config, day_index);
  Grid g = Grid::Zero(kRawGridSize, kRawGridSize);
  for (const auto& b : blobs) {
    const double cx = b.x0 + b.vx * step;
    const double cy = b.y0 + b.vy * step;
    const double inv2s2 = 1.0 / (2.0 * b.sigma * b.sigma);
    for (int y = 0; y < kRawGridSize; ++y) {
      const double dy = y - cy;
      for (int x = 0; x < kRawGridSize; ++x) {
        const double dx = x - cx;
        g(y, x) += static_cast<float>(b.amplitude *
                                      std::exp(-(dx * dx + dy * dy) * inv2s2));
      }
    }
  }
  return g;
}

std::vector<StationMeta> synthetic_station_network() {
  // 22 stations on 17 distinct sites: the last five reuse coordinates of
  // the first five.
  std::vector<StationMeta> st;
  const GeoBounds b;
  for (int i = 0; i < 17; ++i) {
    StationMeta m;
    char id[8];
    std::snprintf(id, sizeof(id), "S%02d", i + 1);
    m.id = id;
    // fixed quasi-uniform scatter inside the bounding box
    double u = std::fmod(0.618033988749895 * (i + 1), 1.0);
    double v = std::fmod(0.754877666246693 * (i + 1), 1.0);
    m.position.lat = b.lat_min + (0.08 + 0.84 * u) * (b.lat_max - b.lat_min);
    m.position.lon = b.lon_min + (0.08 + 0.84 * v) * (b.lon_max - b.lon_min);
    st.push_back(m);
  }
  for (int i = 17; i < kNumStations; ++i) {
    StationMeta m;
    char id[8];
    std::snprintf(id, sizeof(id), "S%02d", i + 1);
    m.id = id;
    m.position = st[static_cast<size_t>(i - 17)].position;
    st.push_back(m);
  }
  return st;
}

void generate_synthetic_corpus(const SyntheticConfig& config,
                               const std::string& out_dir) {
  if (config.blobs < 0 || config.train_days < 0 || config.test_days < 0 ||
      config.frames_per_day <= 0)
    throw std::invalid_argument("generate_synthetic_corpus: nonpositive counts");

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const int total_days = config.train_days + config.test_days;
  for (int day = 0; day < total_days; ++day) {
    const TimePoint t0 = day_start(config, day);
    std::vector<RadarFrame> frames(static_cast<size_t>(config.frames_per_day));
    for (int k = 0; k < config.frames_per_day; ++k) {
      frames[static_cast<size_t>(k)].timestamp = t0 + k * kRadarStepSec;
      frames[static_cast<size_t>(k)].grid = synthetic_raw_frame(config, day, k);
    }
    write_radar_day(out_dir + "/" + format_date(t0) + ".nwr", frames);
  }

  // smooth diurnal latent fields per variable; per-record Gaussian noise
  const std::array<double, kNumVariables> base = {12.0, 75.0, 1013.0, 5.0,
                                                  180.0, 15.0, 1.5, 9.0};
  const std::array<double, kNumVariables> amp = {6.0, 10.0, 4.0, 2.0,
                                                 40.0, 5.0, 0.6, 3.0};
  StationCorpus corpus;
  corpus.stations = synthetic_station_network();
  corpus.series.resize(corpus.stations.size());
  std::mt19937_64 rng(static_cast<std::uint64_t>(config.seed) ^ 0xabcdef12345ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * M_PI);

  std::vector<std::array<double, kNumVariables>> phase(corpus.stations.size());
  for (auto& p : phase)
    for (auto& x : p) x = uphase(rng);

  for (int day = 0; day < total_days; ++day) {
    const TimePoint t0 = day_start(config, day);
    const TimePoint t_end = t0 + config.frames_per_day * kRadarStepSec +
                            (kLeadSteps + 2) * kRadarStepSec;
    for (TimePoint t = t0; t <= t_end; t += kStationStepSec) {
      for (size_t s = 0; s < corpus.stations.size(); ++s) {
        StationObservation obs;
        obs.timestamp = t;
        obs.station = static_cast<int>(s);
        for (int v = 0; v < kNumVariables; ++v) {
          const size_t vi = static_cast<size_t>(v);
          double x = base[vi] +
                     amp[vi] * std::sin(2.0 * M_PI * (t - t0) / 86400.0 +
                                        phase[s][vi]) +
                     config.station_noise * noise(rng);
          obs.values[vi] = x;
        }
        corpus.series[s].push_back(obs);
      }
    }
  }
  write_station_corpus(out_dir + "/stations.csv", corpus);
}

}  // namespace nowcast
