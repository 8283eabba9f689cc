#pragma once

#include "nowcast/data.hpp"

#include <string>
#include <vector>

namespace nowcast {

/// One array-container file per calendar day; frames stored as 16-bit
/// scaled integers (value = int / 100 mm). Byte layout in docs/formats.md.
struct RadarDayFile {
  std::vector<RadarFrame> frames;  // raw mm, sorted by timestamp
};

void write_radar_day(const std::string& path, const std::vector<RadarFrame>& frames);
std::vector<RadarFrame> read_radar_day(const std::string& path);

/// Reads every *.nwr file under dir, concatenated and sorted by timestamp.
std::vector<RadarFrame> read_radar_corpus(const std::string& dir);

/// Float array container used for kriging-stack caches (same header
/// layout as the radar container, float32 payload).
void write_float_array(const std::string& path, const std::vector<Index>& shape,
                       const float* data, std::uint64_t config_hash);
std::vector<float> read_float_array(const std::string& path,
                                    std::vector<Index>& shape,
                                    std::uint64_t& config_hash);

}  // namespace nowcast
