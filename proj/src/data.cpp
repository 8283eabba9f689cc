#include "nowcast/data.hpp"

#include "nowcast/timeutil.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nowcast {

int variable_index(const std::string& name) {
  for (int i = 0; i < kNumVariables; ++i)
    if (kVariableNames[static_cast<size_t>(i)] == name) return i;
  return -1;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split: " + s);
}

std::vector<SampleRef> DatasetManifest::split_samples(Split s) const {
  std::vector<SampleRef> out;
  for (const auto& r : samples)
    if (r.split == s) out.push_back(r);
  return out;
}

std::int64_t DatasetManifest::count(Split s) const {
  std::int64_t n = 0;
  for (const auto& r : samples) n += (r.split == s) ? 1 : 0;
  return n;
}

void DatasetManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << "nowcast-manifest v1\n";
  out << "seed = " << seed << "\n";
  out << "filter_threshold = " << filter_threshold << "\n";
  out << "filter_frame = " << filter_frame << "\n";
  out << "candidates = " << candidates << "\n";
  out << "dropped_by_filter = " << dropped_by_filter << "\n";
  out << "dropped_by_alignment = " << dropped_by_alignment << "\n";
  out << "clamp_warnings = " << clamp_warnings << "\n";
  out << "count_train = " << count(Split::kTrain) << "\n";
  out << "count_validation = " << count(Split::kValidation) << "\n";
  out << "count_test = " << count(Split::kTest) << "\n";
  out.precision(17);
  for (int v = 0; v < kNumVariables; ++v) {
    out << "stat " << kVariableNames[static_cast<size_t>(v)] << " "
        << stats.mean[static_cast<size_t>(v)] << " "
        << stats.stddev[static_cast<size_t>(v)] << " "
        << (stats.zero_variance[static_cast<size_t>(v)] ? 1 : 0) << "\n";
  }
  for (const auto& r : samples) {
    out << "sample " << split_name(r.split) << " " << r.id << " "
        << r.first_input << " " << r.target_time << "\n";
  }
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "nowcast-manifest v1")
    throw std::runtime_error("not a manifest: " + path);
  DatasetManifest m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "sample") {
      SampleRef r;
      std::string split;
      ss >> split >> r.id >> r.first_input >> r.target_time;
      r.split = split_from_name(split);
      m.samples.push_back(r);
    } else if (key == "stat") {
      std::string name;
      double mean, stddev;
      int zero;
      ss >> name >> mean >> stddev >> zero;
      int v = variable_index(name);
      if (v < 0) throw std::runtime_error("manifest: unknown variable " + name);
      m.stats.mean[static_cast<size_t>(v)] = mean;
      m.stats.stddev[static_cast<size_t>(v)] = stddev;
      m.stats.zero_variance[static_cast<size_t>(v)] = zero != 0;
    } else {
      std::string eq, value;
      ss >> eq >> value;
      if (key == "seed") m.seed = std::stoll(value);
      else if (key == "filter_threshold") m.filter_threshold = std::stod(value);
      else if (key == "filter_frame") m.filter_frame = value;
      else if (key == "candidates") m.candidates = std::stoll(value);
      else if (key == "dropped_by_filter") m.dropped_by_filter = std::stoll(value);
      else if (key == "dropped_by_alignment") m.dropped_by_alignment = std::stoll(value);
      else if (key == "clamp_warnings") m.clamp_warnings = std::stoll(value);
      // count_* lines are derived; ignored on load
    }
  }
  return m;
}

}  // namespace nowcast
