#pragma once

#include <cstdint>
#include <string>

namespace nowcast {

/// Unix timestamp, seconds, UTC.
using TimePoint = std::int64_t;

constexpr TimePoint kRadarStepSec = 5 * 60;
constexpr TimePoint kStationStepSec = 10 * 60;

/// Formats as "YYYY-MM-DDTHH:MM" (UTC, minute precision).
std::string format_utc(TimePoint t);

/// Parses "YYYY-MM-DDTHH:MM[:SS]"; throws std::invalid_argument on garbage.
TimePoint parse_utc(const std::string& s);

std::string format_date(TimePoint t);  // "YYYYMMDD"

inline TimePoint floor_to_10min(TimePoint t) {
  return t - (t % kStationStepSec + kStationStepSec) % kStationStepSec;
}

int utc_year(TimePoint t);
int utc_minute(TimePoint t);

/// Timestamp for a UTC calendar date/time.
TimePoint make_utc(int year, int month, int day, int hour = 0, int minute = 0);

}  // namespace nowcast
