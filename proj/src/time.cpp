#include "achilles/time.hpp"

#include "achilles/error.hpp"

#include <charconv>
#include <chrono>

#include <fmt/format.h>

namespace achilles {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::InvalidArgument: return "invalid_argument";
  case ErrorKind::BadInput: return "bad_input";
  case ErrorKind::CorruptFeed: return "corrupt_feed";
  case ErrorKind::InsufficientHistory: return "insufficient_history";
  case ErrorKind::ShapeMismatch: return "shape_mismatch";
  case ErrorKind::NonFinite: return "non_finite";
  case ErrorKind::FormatVersion: return "format_version";
  case ErrorKind::NotFound: return "not_found";
  case ErrorKind::Rejected: return "rejected";
  case ErrorKind::Coverage: return "coverage";
  case ErrorKind::Io: return "io";
  }
  return "unknown";
}

namespace {

using namespace std::chrono;

[[noreturn]] void bad_time(std::string_view text) {
  throw Error(ErrorKind::BadInput, fmt::format("malformed timestamp '{}'", text));
}

int read_int(std::string_view text, std::string_view& rest, std::size_t min_digits,
             std::size_t max_digits) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
  auto digits = static_cast<std::size_t>(ptr - rest.data());
  if (ec != std::errc{} || digits < min_digits || digits > max_digits) bad_time(text);
  rest.remove_prefix(digits);
  return value;
}

void expect(std::string_view text, std::string_view& rest, char c) {
  if (rest.empty() || rest.front() != c) bad_time(text);
  rest.remove_prefix(1);
}

} // namespace

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, int hour, int minute,
                                int second) {
  year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok() || hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 ||
      second > 59) {
    throw Error(ErrorKind::BadInput,
                fmt::format("invalid civil time {}-{}-{} {}:{}:{}", year, month, day, hour,
                            minute, second));
  }
  auto days = sys_days{ymd}.time_since_epoch().count();
  return {static_cast<std::int64_t>(days) * kDay + hour * 3600 + minute * 60 + second};
}

Timestamp Timestamp::parse(std::string_view text) {
  std::string_view rest = text;
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\r')) rest.remove_suffix(1);
  int y = read_int(text, rest, 4, 4);
  expect(text, rest, '-');
  int mo = read_int(text, rest, 1, 2);
  expect(text, rest, '-');
  int d = read_int(text, rest, 1, 2);
  int h = 0, mi = 0, s = 0;
  if (!rest.empty()) {
    if (rest.front() != ' ' && rest.front() != 'T') bad_time(text);
    rest.remove_prefix(1);
    h = read_int(text, rest, 1, 2);
    expect(text, rest, ':');
    mi = read_int(text, rest, 2, 2);
    if (!rest.empty()) {
      expect(text, rest, ':');
      s = read_int(text, rest, 2, 2);
    }
    if (!rest.empty()) bad_time(text);
  }
  if (mo < 1 || d < 1) bad_time(text);
  return from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, s);
}

bool Timestamp::is_weekend() const {
  weekday wd{sys_days{days{day_index()}}};
  return wd == Saturday || wd == Sunday;
}

std::string Timestamp::to_string() const {
  year_month_day ymd{sys_days{days{day_index()}}};
  std::int64_t sod = seconds - day_index() * kDay;
  return fmt::format("{:04}-{:02}-{:02} {:02}:{:02}:{:02}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     sod / 3600, (sod / 60) % 60, sod % 60);
}

std::string Timestamp::date_string() const {
  year_month_day ymd{sys_days{days{day_index()}}};
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

} // namespace achilles
