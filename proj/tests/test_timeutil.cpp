#include "nowcast/timeutil.hpp"

#include <doctest.h>

#include <stdexcept>

using namespace nowcast;

TEST_CASE("make_utc matches known unix epochs") {
  CHECK(make_utc(1970, 1, 1) == 0);
  CHECK(make_utc(2019, 1, 1) == 1546300800);
  CHECK(make_utc(2016, 2, 29, 12, 30) == 1456749000);  // leap day
}

TEST_CASE("format and parse round-trip") {
  const TimePoint t = make_utc(2018, 6, 3, 14, 25);
  CHECK(format_utc(t) == "2018-06-03T14:25");
  CHECK(parse_utc(format_utc(t)) == t);
  CHECK(parse_utc("2018-06-03T14:25:00") == t);
  CHECK(format_date(t) == "20180603");
}

TEST_CASE("parse_utc rejects garbage") {
  CHECK_THROWS_AS(parse_utc("not a time"), std::invalid_argument);
  CHECK_THROWS_AS(parse_utc(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_utc("2018-13-01T00:00"), std::invalid_argument);
}

TEST_CASE("floor_to_10min clamps to the station cadence") {
  const TimePoint base = make_utc(2018, 1, 1, 12, 0);
  CHECK(floor_to_10min(base) == base);
  CHECK(floor_to_10min(base + 5 * 60) == base);
  CHECK(floor_to_10min(base + 9 * 60 + 59) == base);
  CHECK(floor_to_10min(base + 10 * 60) == base + 10 * 60);
}

TEST_CASE("utc_year and utc_minute") {
  CHECK(utc_year(make_utc(2019, 12, 31, 23, 55)) == 2019);
  CHECK(utc_year(make_utc(2016, 1, 1)) == 2016);
  CHECK(utc_minute(make_utc(2018, 1, 1, 0, 45)) == 45);
}
