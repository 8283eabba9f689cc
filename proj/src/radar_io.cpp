#include "nowcast/radar_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace nowcast {

namespace {

constexpr char kRadarMagic[4] = {'N', 'W', 'R', 'D'};
constexpr char kFloatMagic[4] = {'N', 'W', 'F', '4'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("radar_io: truncated file");
  return v;
}

}  // namespace

void write_radar_day(const std::string& path,
                     const std::vector<RadarFrame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kRadarMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(frames.size()));
  const std::uint32_t rows = frames.empty() ? 0 : frames[0].grid.rows();
  const std::uint32_t cols = frames.empty() ? 0 : frames[0].grid.cols();
  put(out, rows);
  put(out, cols);
  for (const auto& f : frames) {
    if (f.normalized)
      throw std::invalid_argument("write_radar_day: expects raw mm frames");
    if (static_cast<std::uint32_t>(f.grid.rows()) != rows ||
        static_cast<std::uint32_t>(f.grid.cols()) != cols)
      throw std::invalid_argument("write_radar_day: inconsistent frame size");
    put(out, static_cast<std::int64_t>(f.timestamp));
    for (Eigen::Index i = 0; i < f.grid.size(); ++i) {
      double v = f.grid.data()[i];
      if (v < 0) throw std::invalid_argument("write_radar_day: negative value");
      put(out, static_cast<std::uint16_t>(std::lround(std::min(v, 655.35) * 100.0)));
    }
  }
  // text sidecar with the fixed metadata
  std::ofstream meta(path + ".txt");
  meta << "format = nwrd v" << kVersion << "\n"
       << "units = mm per 5 min accumulation\n"
       << "scale = value/100\n"
       << "frames = " << frames.size() << "\n"
       << "rows = " << rows << "\ncols = " << cols << "\n";
}

std::vector<RadarFrame> read_radar_day(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kRadarMagic, 4) != 0)
    throw std::runtime_error("not a radar container: " + path);
  auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported radar container version");
  auto count = get<std::uint32_t>(in);
  auto rows = get<std::uint32_t>(in);
  auto cols = get<std::uint32_t>(in);

  std::vector<RadarFrame> frames(count);
  std::vector<std::uint16_t> buf(static_cast<size_t>(rows) * cols);
  for (auto& f : frames) {
    f.timestamp = get<std::int64_t>(in);
    in.read(reinterpret_cast<char*>(buf.data()), buf.size() * 2);
    if (!in) throw std::runtime_error("radar_io: truncated frame");
    f.grid.resize(rows, cols);
    for (size_t i = 0; i < buf.size(); ++i)
      f.grid.data()[i] = static_cast<float>(buf[i]) / 100.0f;
    f.normalized = false;
  }
  return frames;
}

std::vector<RadarFrame> read_radar_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".nwr") paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<RadarFrame> all;
  for (const auto& p : paths) {
    auto day = read_radar_day(p);
    all.insert(all.end(), day.begin(), day.end());
  }
  std::sort(all.begin(), all.end(),
            [](const RadarFrame& a, const RadarFrame& b) {
              return a.timestamp < b.timestamp;
            });
  return all;
}

void write_float_array(const std::string& path, const std::vector<Index>& shape,
                       const float* data, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kFloatMagic, 4);
  put(out, kVersion);
  put(out, config_hash);
  put(out, static_cast<std::uint32_t>(shape.size()));
  std::int64_t n = 1;
  for (Index d : shape) {
    put(out, static_cast<std::int64_t>(d));
    n *= d;
  }
  out.write(reinterpret_cast<const char*>(data), n * sizeof(float));
}

std::vector<float> read_float_array(const std::string& path,
                                    std::vector<Index>& shape,
                                    std::uint64_t& config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFloatMagic, 4) != 0)
    throw std::runtime_error("not a float container: " + path);
  if (get<std::uint32_t>(in) != kVersion)
    throw std::runtime_error("unsupported float container version");
  config_hash = get<std::uint64_t>(in);
  auto ndim = get<std::uint32_t>(in);
  shape.clear();
  std::int64_t n = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    auto d = get<std::int64_t>(in);
    shape.push_back(static_cast<Index>(d));
    n *= d;
  }
  std::vector<float> data(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(data.data()), n * sizeof(float));
  if (!in) throw std::runtime_error("float container truncated: " + path);
  return data;
}

}  // namespace nowcast
