#include "nowcast/radar_io.hpp"
#include "nowcast/station_io.hpp"
#include "nowcast/synthetic.hpp"
#include "nowcast/timeutil.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() / (std::string("nowcast_io_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("radar day files round-trip at centi-millimeter precision") {
  const std::string dir = temp_dir("radar");
  std::vector<RadarFrame> frames;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 5; ++k) {
    RadarFrame f;
    f.timestamp = make_utc(2018, 3, 1) + k * kRadarStepSec;
    f.grid = Grid(kGridSize, kGridSize);
    for (Eigen::Index i = 0; i < f.grid.size(); ++i)
      // multiples of 0.01 mm survive the u16 quantization exactly
      f.grid.data()[i] = static_cast<float>(rng() % 4000) / 100.0f;
    frames.push_back(std::move(f));
  }
  write_radar_day(dir + "/day.nwr", frames);
  const auto back = read_radar_day(dir + "/day.nwr");
  REQUIRE(back.size() == frames.size());
  for (size_t k = 0; k < frames.size(); ++k) {
    CHECK(back[k].timestamp == frames[k].timestamp);
    CHECK((back[k].grid - frames[k].grid).cwiseAbs().maxCoeff() < 1e-6f);
  }
}

TEST_CASE("corpus reader concatenates and sorts all day files") {
  const std::string dir = temp_dir("corpus");
  for (int day : {2, 1}) {  // written out of order on purpose
    std::vector<RadarFrame> frames;
    RadarFrame f;
    f.timestamp = make_utc(2018, 3, day);
    f.grid = Grid::Constant(kGridSize, kGridSize, static_cast<float>(day));
    frames.push_back(f);
    write_radar_day(dir + "/" + format_date(f.timestamp) + ".nwr", frames);
  }
  const auto all = read_radar_corpus(dir);
  REQUIRE(all.size() == 2);
  CHECK(all[0].timestamp < all[1].timestamp);
  CHECK(all[0].grid(0, 0) == doctest::Approx(1.0f));
}

TEST_CASE("float array container round-trips shape, payload and hash") {
  const std::string dir = temp_dir("floats");
  std::vector<float> data(2 * 3 * 4);
  for (size_t i = 0; i < data.size(); ++i) data[i] = 0.25f * static_cast<float>(i);
  write_float_array(dir + "/a.nwf", {2, 3, 4}, data.data(), 0xdeadbeefULL);

  std::vector<Index> shape;
  std::uint64_t hash = 0;
  const auto back = read_float_array(dir + "/a.nwf", shape, hash);
  CHECK(shape == std::vector<Index>{2, 3, 4});
  CHECK(hash == 0xdeadbeefULL);
  CHECK(back == data);
}

TEST_CASE("station corpus round-trips missing values") {
  const std::string dir = temp_dir("stations");
  StationCorpus c;
  c.stations = synthetic_station_network();
  c.series.resize(c.stations.size());
  const TimePoint t0 = make_utc(2018, 3, 1);
  for (int s = 0; s < kNumStations; ++s) {
    StationObservation obs;
    obs.timestamp = t0;
    obs.station = s;
    for (int v = 0; v < kNumVariables; ++v)
      if (!(s == 3 && v == 5))  // one hole
        obs.values[static_cast<size_t>(v)] = s + 0.125 * v;
    c.series[static_cast<size_t>(s)].push_back(obs);
  }
  write_station_corpus(dir + "/stations.csv", c);
  const StationCorpus back = read_station_corpus(dir + "/stations.csv");

  REQUIRE(back.stations.size() == c.stations.size());
  const StationObservation* obs = back.record_at(3, t0);
  REQUIRE(obs != nullptr);
  CHECK(!obs->values[5].has_value());
  CHECK(obs->values[0].has_value());
  CHECK(*obs->values[2] == doctest::Approx(3.25));
  CHECK(back.record_at(3, t0 + 60) == nullptr);  // exact-match lookup
}
