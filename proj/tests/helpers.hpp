#pragma once

// Shared fixtures for the unit and acceptance tests: fabricated corpora
// with controlled rain coverage and fully populated station series.

#include "nowcast/data.hpp"
#include "nowcast/pipeline.hpp"
#include "nowcast/radar_io.hpp"
#include "nowcast/station_io.hpp"
#include "nowcast/synthetic.hpp"
#include "nowcast/timeutil.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace testutil {

using nowcast::Grid;

/// 288x288 raw grid with the top `wet_fraction` of rows at `wet_value` mm
/// and the rest dry.
inline Grid banded_grid(float wet_value, double wet_fraction) {
  Grid g = Grid::Zero(nowcast::kRawGridSize, nowcast::kRawGridSize);
  const int wet_rows =
      static_cast<int>(std::lround(wet_fraction * nowcast::kRawGridSize));
  g.topRows(wet_rows).setConstant(wet_value);
  return g;
}

/// Writes a corpus under `dir`: `train_days` days in 2018 and `test_days`
/// days in 2019, `frames_per_day` contiguous 5-minute frames per day
/// starting at midnight, radar content from frame_fn(day, step). Station
/// series cover every frame plus the 30-minute lead with deterministic,
/// fully populated values.
inline void write_corpus(const std::string& dir, int train_days, int test_days,
                         int frames_per_day,
                         const std::function<Grid(int, int)>& frame_fn) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nowcast::StationCorpus stations;
  stations.stations = nowcast::synthetic_station_network();
  stations.series.resize(stations.stations.size());

  const int total_days = train_days + test_days;
  for (int day = 0; day < total_days; ++day) {
    const int year = day < train_days ? 2018 : 2019;
    const int day_of_month = day < train_days ? day + 1 : day - train_days + 1;
    const nowcast::TimePoint day_start = nowcast::make_utc(year, 1, day_of_month);

    std::vector<nowcast::RadarFrame> frames;
    for (int step = 0; step < frames_per_day; ++step) {
      nowcast::RadarFrame f;
      f.timestamp = day_start + step * nowcast::kRadarStepSec;
      f.grid = frame_fn(day, step);
      frames.push_back(std::move(f));
    }
    nowcast::write_radar_day(dir + "/" + nowcast::format_date(day_start) + ".nwr",
                             frames);

    const nowcast::TimePoint last = day_start + (frames_per_day + 8) * nowcast::kRadarStepSec;
    for (nowcast::TimePoint t = day_start; t <= last; t += nowcast::kStationStepSec) {
      for (int s = 0; s < nowcast::kNumStations; ++s) {
        nowcast::StationObservation obs;
        obs.timestamp = t;
        obs.station = s;
        for (int v = 0; v < nowcast::kNumVariables; ++v)
          obs.values[static_cast<size_t>(v)] =
              10.0 * v + 0.3 * s +
              std::sin(static_cast<double>(t % 86400) / 3600.0 + v);
        stations.series[static_cast<size_t>(s)].push_back(obs);
      }
    }
  }
  nowcast::write_station_corpus(dir + "/stations.csv", stations);
}

/// Corpus whose frames never change within a day: the +30-minute target
/// equals the last input frame exactly.
inline void write_static_corpus(const std::string& dir, int train_days,
                                int test_days, int frames_per_day,
                                float wet_value = 2.0f,
                                double wet_fraction = 0.6) {
  write_corpus(dir, train_days, test_days, frames_per_day,
               [&](int, int) { return banded_grid(wet_value, wet_fraction); });
}

}  // namespace testutil
