#include "nowcast/timeutil.hpp"

#include <cstdio>
#include <ctime>
#include <stdexcept>

namespace nowcast {

namespace {
std::tm to_tm_utc(TimePoint t) {
  std::time_t tt = static_cast<std::time_t>(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  return tm;
}
}  // namespace

std::string format_utc(TimePoint t) {
  std::tm tm = to_tm_utc(t);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min);
  return buf;
}

std::string format_date(TimePoint t) {
  std::tm tm = to_tm_utc(t);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d%02d%02d", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday);
  return buf;
}

TimePoint parse_utc(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &se);
  if (n < 5) throw std::invalid_argument("parse_utc: bad timestamp '" + s + "'");
  return make_utc(y, mo, d, h, mi) + se;
}

TimePoint make_utc(int year, int month, int day, int hour, int minute) {
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour < 0 ||
      hour > 23 || minute < 0 || minute > 59)
    throw std::invalid_argument("make_utc: field out of range");
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  std::time_t t = timegm(&tm);
  if (t == static_cast<std::time_t>(-1))
    throw std::invalid_argument("make_utc: invalid date");
  return static_cast<TimePoint>(t);
}

int utc_year(TimePoint t) { return to_tm_utc(t).tm_year + 1900; }
int utc_minute(TimePoint t) { return to_tm_utc(t).tm_min; }

}  // namespace nowcast
