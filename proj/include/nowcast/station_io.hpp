#pragma once

#include "nowcast/data.hpp"

#include <map>
#include <string>
#include <vector>

namespace nowcast {

struct StationCorpus {
  std::vector<StationMeta> stations;
  // per station, sorted by timestamp
  std::vector<std::vector<StationObservation>> series;

  int station_index(const std::string& id) const;
  /// Record at exactly t for the given station, or nullptr.
  const StationObservation* record_at(int station, TimePoint t) const;
};

/// Delimiter-separated text, one row per (timestamp, station); columns are
/// the 8 variables in fixed order, empty field = missing.
void write_station_corpus(const std::string& path, const StationCorpus& corpus);
StationCorpus read_station_corpus(const std::string& path);

}  // namespace nowcast
