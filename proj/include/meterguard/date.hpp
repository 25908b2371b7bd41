#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace meterguard {

/// Calendar day backed by std::chrono::sys_days, so day arithmetic is integral.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days d) : days_(d) {}

  static Date from_ymd(int year, unsigned month, unsigned day);

  /// Parses `YYYY-MM-DD`. Throws std::invalid_argument on malformed or
  /// nonexistent dates.
  static Date parse(std::string_view iso);

  std::string iso() const;

  int year() const;
  unsigned month() const;  // 1..12
  unsigned day() const;    // 1..31
  /// 0 = Monday ... 6 = Sunday.
  unsigned weekday_index() const;
  /// 0-based day of year.
  int day_of_year() const;

  std::chrono::sys_days sys_days() const { return days_; }

  Date operator+(long n) const { return Date{days_ + std::chrono::days{n}}; }
  Date operator-(long n) const { return Date{days_ - std::chrono::days{n}}; }
  friend long operator-(const Date& a, const Date& b) {
    return (a.days_ - b.days_).count();
  }
  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

}  // namespace meterguard
