#include "meterguard/date.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace meterguard {

Date Date::from_ymd(int y, unsigned m, unsigned d) {
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                       std::chrono::day{d}};
  if (!ymd.ok()) {
    throw std::invalid_argument("invalid calendar date " + std::to_string(y) + "-" +
                                std::to_string(m) + "-" + std::to_string(d));
  }
  return Date{std::chrono::sys_days{ymd}};
}

Date Date::parse(std::string_view s) {
  auto field = [&](std::size_t pos, std::size_t len) {
    int value = 0;
    const char* first = s.data() + pos;
    const char* last = first + len;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
      throw std::invalid_argument("malformed date '" + std::string(s) + "'");
    }
    return value;
  };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    throw std::invalid_argument("malformed date '" + std::string(s) + "', expected YYYY-MM-DD");
  }
  return from_ymd(field(0, 4), static_cast<unsigned>(field(5, 2)),
                  static_cast<unsigned>(field(8, 2)));
}

std::string Date::iso() const {
  const std::chrono::year_month_day ymd{days_};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::year() const { return static_cast<int>(std::chrono::year_month_day{days_}.year()); }
unsigned Date::month() const { return static_cast<unsigned>(std::chrono::year_month_day{days_}.month()); }
unsigned Date::day() const { return static_cast<unsigned>(std::chrono::year_month_day{days_}.day()); }

unsigned Date::weekday_index() const { return std::chrono::weekday{days_}.iso_encoding() - 1; }

int Date::day_of_year() const {
  const std::chrono::year_month_day ymd{days_};
  const std::chrono::sys_days jan1{ymd.year() / std::chrono::January / 1};
  return static_cast<int>((days_ - jan1).count());
}

}  // namespace meterguard
