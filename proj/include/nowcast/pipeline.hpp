#pragma once

#include "nowcast/data.hpp"
#include "nowcast/metrics.hpp"
#include "nowcast/station_io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nowcast {

/// Center-crops 288x288 from the raw composite and downsamples to 64x64 by
/// area-weighted averaging (factor 4.5, fractional pixel coverage).
Grid crop_and_resize(const Grid& raw);

/// Division by the dataset maximum (47.83 mm). Values above the maximum are
/// clamped; the caller counts clamp warnings in the manifest.
Grid normalize_precip(const Grid& grid_mm, std::int64_t* clamp_warnings = nullptr);

inline Grid denormalize_precip(const Grid& g) {
  return g * static_cast<float>(kPrecipMaxMm);
}

/// Fraction of strictly positive pixels.
double rain_fraction(const Grid& g);

/// Keep decision for one sample given the frame the filter inspects.
bool rain_fraction_keep(const Grid& filter_frame, double min_fraction);

/// Maps each 5-minute radar timestamp to the station record at
/// floor-to-10-minutes. Returns nothing if any lag has no fully populated
/// record for every station (the sample is excluded).
std::optional<StationTensor> align_station_records(
    const std::vector<TimePoint>& radar_timestamps, const StationCorpus& corpus);

/// Per-variable z-score with stats from the training split. Zero-variance
/// variables map to all-zeros.
StationTensor standardize_station(const StationTensor& raw,
                                  const StandardizationStats& stats);

/// Mean/std per variable over every (station, lag) cell of the given raw
/// tensors.
StandardizationStats compute_standardization(
    const std::vector<const StationTensor*>& train_tensors);

struct ManifestConfig {
  std::int64_t seed = 0;
  double filter_threshold = 0.5;
  std::string filter_frame = "target";  // or "last_input"
  int test_year = 2019;                 // train years precede it
};

/// Builds the aligned, filtered, split manifest from a corpus directory
/// (radar day files + stations.csv).
DatasetManifest build_manifest(const std::string& corpus_root,
                               const ManifestConfig& config);

/// Corpus loaded in memory for sample materialization.
struct Corpus {
  std::vector<RadarFrame> radar;  // raw mm, sorted
  StationCorpus stations;
  std::map<TimePoint, size_t> radar_index;

  static Corpus load(const std::string& root);
  const RadarFrame* frame_at(TimePoint t) const;
};

/// Materialized model inputs for one sample.
struct MaterializedSample {
  std::vector<Grid> inputs;  // 12 normalized frames
  Grid target;               // normalized
  StationTensor station;     // standardized
};

MaterializedSample materialize_sample(const Corpus& corpus,
                                      const SampleRef& ref,
                                      const StandardizationStats& stats);

}  // namespace nowcast
