#include "nowcast/station_io.hpp"

#include "nowcast/timeutil.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nowcast {

int StationCorpus::station_index(const std::string& id) const {
  for (size_t i = 0; i < stations.size(); ++i)
    if (stations[i].id == id) return static_cast<int>(i);
  return -1;
}

const StationObservation* StationCorpus::record_at(int station,
                                                   TimePoint t) const {
  const auto& s = series.at(static_cast<size_t>(station));
  auto it = std::lower_bound(
      s.begin(), s.end(), t,
      [](const StationObservation& o, TimePoint tt) { return o.timestamp < tt; });
  if (it == s.end() || it->timestamp != t) return nullptr;
  return &*it;
}

void write_station_corpus(const std::string& path, const StationCorpus& corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "timestamp,station,lat,lon";
  for (const auto& v : kVariableNames) out << "," << v;
  out << "\n";
  out.precision(10);
  for (size_t s = 0; s < corpus.series.size(); ++s) {
    const auto& meta = corpus.stations[s];
    for (const auto& obs : corpus.series[s]) {
      out << format_utc(obs.timestamp) << "," << meta.id << ","
          << meta.position.lat << "," << meta.position.lon;
      for (const auto& v : obs.values) {
        out << ",";
        if (v) out << *v;
      }
      out << "\n";
    }
  }
}

StationCorpus read_station_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  StationCorpus corpus;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty station corpus: " + path);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    // trailing empty field is eaten by getline
    while (fields.size() < 4 + kNumVariables) fields.emplace_back();
    if (fields.size() != 4 + kNumVariables)
      throw std::runtime_error("station corpus line " + std::to_string(lineno) +
                               ": wrong column count");
    const std::string& id = fields[1];
    int idx = corpus.station_index(id);
    if (idx < 0) {
      idx = static_cast<int>(corpus.stations.size());
      corpus.stations.push_back(
          {id, {std::stod(fields[2]), std::stod(fields[3])}});
      corpus.series.emplace_back();
    }
    StationObservation obs;
    obs.timestamp = parse_utc(fields[0]);
    obs.station = idx;
    for (int v = 0; v < kNumVariables; ++v)
      if (!fields[4 + v].empty()) obs.values[v] = std::stod(fields[4 + v]);
    corpus.series[static_cast<size_t>(idx)].push_back(obs);
  }
  for (auto& s : corpus.series)
    std::sort(s.begin(), s.end(),
              [](const StationObservation& a, const StationObservation& b) {
                return a.timestamp < b.timestamp;
              });
  return corpus;
}

}  // namespace nowcast
