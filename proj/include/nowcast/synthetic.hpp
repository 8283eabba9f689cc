#pragma once

#include "nowcast/data.hpp"
#include "nowcast/station_io.hpp"

#include <string>
#include <vector>

namespace nowcast {

/// Configuration of the deterministic synthetic corpus: advecting Gaussian
/// rain blobs on a 288x288 grid at 5-minute cadence plus 22 station series
/// at 10-minute cadence sampled from smooth latent fields.
struct SyntheticConfig {
  std::int64_t seed = 0;
  int train_days = 2;       // calendar days in the train years
  int test_days = 1;        // calendar days in the test year
  int frames_per_day = 48;  // 4 hours of 5-minute frames per day
  int blobs = 3;
  double advection_px_per_step = 1.5;  // blob speed, raw pixels per frame
  double blob_sigma_px = 60.0;
  double blob_amplitude_mm = 8.0;
  double station_noise = 0.1;
  int train_year = 2018;
  int test_year = 2019;
};

/// Ground-truth trajectory of one blob; centers move linearly:
/// center(t) = center(0) + velocity * step.
struct BlobTruth {
  double x0, y0;    // raw-grid pixels at the first frame of the day
  double vx, vy;    // pixels per 5-minute step
  double sigma;     // px
  double amplitude; // mm
};

/// Blob parameters for one day, derived deterministically from the seed.
std::vector<BlobTruth> synthetic_blob_truth(const SyntheticConfig& config,
                                            int day_index);

/// The fixed synthetic station network: 22 stations on 17 distinct sites
/// inside the radar bounding box.
std::vector<StationMeta> synthetic_station_network();

/// Raw 288x288 frame for (day, step) straight from the blob truth.
Grid synthetic_raw_frame(const SyntheticConfig& config, int day_index, int step);

/// Writes the radar day files and stations.csv under out_dir. Identical
/// config (including seed) produces a byte-identical corpus.
void generate_synthetic_corpus(const SyntheticConfig& config,
                               const std::string& out_dir);

}  // namespace nowcast
