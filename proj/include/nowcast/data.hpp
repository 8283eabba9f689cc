#pragma once

#include "nowcast/geo.hpp"
#include "nowcast/tensor.hpp"
#include "nowcast/timeutil.hpp"

#include <Eigen/Core>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nowcast {

constexpr int kGridSize = 64;
constexpr int kRawGridSize = 288;
constexpr int kNumStations = 22;
constexpr int kNumVariables = 8;
constexpr int kNumLags = 12;
constexpr int kLeadSteps = 6;  // +30 minutes at 5-minute cadence

/// Fixed variable order of the station corpus.
inline const std::array<std::string, kNumVariables> kVariableNames = {
    "air_temperature",   "humidity",          "atmospheric_pressure",
    "avg_wind_speed",    "wind_direction",    "std_wind_direction",
    "std_wind_speed",    "max_wind_speed"};

int variable_index(const std::string& name);  // -1 if unknown

using Grid = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One 64x64 precipitation map (mm per 5-minute accumulation, or [0,1]
/// once normalized).
struct RadarFrame {
  TimePoint timestamp = 0;
  Grid grid;
  bool normalized = false;
};

struct StationMeta {
  std::string id;
  LatLon position;
};

/// One row of the station corpus; missing variables are unset.
struct StationObservation {
  TimePoint timestamp = 0;
  int station = 0;  // index into the station list
  std::array<std::optional<double>, kNumVariables> values;
};

/// Standardized observations for one sample, shaped
/// (stations=22, variables=8, lags=12), row-major.
struct StationTensor {
  std::vector<double> data;
  bool standardized = false;

  StationTensor() : data(static_cast<size_t>(kNumStations) * kNumVariables * kNumLags, 0.0) {}

  double& at(int station, int variable, int lag) {
    return data[(static_cast<size_t>(station) * kNumVariables + variable) * kNumLags + lag];
  }
  double at(int station, int variable, int lag) const {
    return data[(static_cast<size_t>(station) * kNumVariables + variable) * kNumLags + lag];
  }
};

struct StandardizationStats {
  std::array<double, kNumVariables> mean{};
  std::array<double, kNumVariables> stddev{};
  std::array<bool, kNumVariables> zero_variance{};
};

enum class Split { kTrain, kValidation, kTest };
std::string split_name(Split s);
Split split_from_name(const std::string& s);

/// One aligned nowcasting case: 12 input frames, the +30-minute target,
/// and the index-aligned station tensor.
struct SampleRef {
  std::string id;            // timestamp of the last input frame
  TimePoint first_input = 0;
  TimePoint target_time = 0;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::int64_t seed = 0;
  double filter_threshold = 0.5;
  std::string filter_frame = "target";  // or "last_input"
  StandardizationStats stats;
  std::vector<SampleRef> samples;

  // bookkeeping
  std::int64_t candidates = 0;
  std::int64_t dropped_by_filter = 0;
  std::int64_t dropped_by_alignment = 0;
  std::int64_t clamp_warnings = 0;

  std::vector<SampleRef> split_samples(Split s) const;
  std::int64_t count(Split s) const;

  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
};

}  // namespace nowcast
