#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace achilles {

/// UTC instant with one-second resolution. Bars live on minute boundaries;
/// sentiment readings may carry a seconds offset.
struct Timestamp {
  std::int64_t seconds = 0;

  static constexpr std::int64_t kMinute = 60;
  static constexpr std::int64_t kDay = 86400;

  constexpr auto operator<=>(const Timestamp&) const = default;

  constexpr Timestamp plus_minutes(std::int64_t m) const { return {seconds + m * kMinute}; }
  constexpr Timestamp floor_minute() const {
    std::int64_t r = seconds % kMinute;
    if (r < 0) r += kMinute;
    return {seconds - r};
  }
  constexpr std::int64_t minutes_since(Timestamp other) const {
    return (seconds - other.seconds) / kMinute;
  }
  /// Days since 1970-01-01 (floor).
  constexpr std::int64_t day_index() const {
    return seconds >= 0 ? seconds / kDay : -((-seconds + kDay - 1) / kDay);
  }
  constexpr Timestamp start_of_day() const { return {day_index() * kDay}; }

  bool is_weekend() const;

  /// Accepts `YYYY-MM-DD H:MM[:SS]`, `YYYY-MM-DDTHH:MM:SS` and a bare date.
  static Timestamp parse(std::string_view text);
  static Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0,
                              int minute = 0, int second = 0);

  /// `YYYY-MM-DD HH:MM:SS`
  std::string to_string() const;
  /// `YYYY-MM-DD`
  std::string date_string() const;
};

} // namespace achilles
