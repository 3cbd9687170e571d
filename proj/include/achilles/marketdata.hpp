#pragma once

#include "achilles/time.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace achilles {

class Timeframe {
public:
  explicit Timeframe(int minutes);
  int minutes() const noexcept { return minutes_; }
  bool operator==(const Timeframe&) const = default;

private:
  int minutes_;
};

struct Bar {
  Timestamp time;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  /// low <= min(open, close), high >= max(open, close), volume >= 0.
  bool consistent() const noexcept;
};

/// Indicator column; `nullopt` before the smoothing seed.
using Indicator = std::vector<std::optional<double>>;

struct BarSeries {
  Timeframe timeframe{1};
  std::vector<Bar> bars;
  Indicator rsi; ///< empty when not computed
  Indicator ema; ///< empty when not computed

  std::size_t size() const noexcept { return bars.size(); }
  bool enriched() const noexcept { return !rsi.empty() && !ema.empty(); }
  std::vector<double> closes() const;

  /// Index of the first row where every indicator is defined, or size() if none.
  std::size_t first_complete_row() const;

  /// Throws on non-increasing timestamps or misaligned indicator columns.
  void validate() const;
};

enum class EmaVariant {
  Paper,    ///< k = 2 / (X - 1)
  Standard, ///< k = 2 / (X + 1)
};

struct IndicatorParams {
  int rsi_period = 14;
  int ema_length = 14;
  EmaVariant ema_variant = EmaVariant::Paper;

  double ema_k() const;
  void validate() const;
};

enum class OhlcCheck {
  Count,  ///< keep inconsistent rows, report them in LoadStats
  Reject, ///< treat an inconsistent row as malformed
};

struct LoadOptions {
  OhlcCheck ohlc = OhlcCheck::Count;
};

struct LoadStats {
  std::size_t rows = 0;
  std::size_t ohlc_violations = 0;
};

/// Reads `Time,Open,High,Low,Close,Volume` (optionally followed by `,RSI,EMA`).
/// Rows are sorted by time; a repeated timestamp is rejected as a corrupt feed.
BarSeries load_bars(std::istream& source, Timeframe timeframe, const LoadOptions& options = {},
                    LoadStats* stats = nullptr);

/// Writes the bar CSV, appending `RSI,EMA` when the series is enriched.
void write_bars(std::ostream& sink, const BarSeries& series);

/// Wilder smoothing: seed is the mean of the first n values, then
/// s(t) = (s(t-1) * (n - 1) + v(t)) / n.
Indicator smma(std::span<const double> values, int n);

Indicator rsi(const BarSeries& series, const IndicatorParams& params);
Indicator ema(const BarSeries& series, const IndicatorParams& params);

/// Returns a copy with both indicator columns filled in.
BarSeries enrich(BarSeries series, const IndicatorParams& params);

/// RSI from smoothed up/down moves with the flat-market convention (0/0 -> 50).
double rsi_from_averages(double avg_up, double avg_down) noexcept;

/// Streaming form of the RSI and EMA recurrences, used when synthetic bars are
/// appended one at a time.
class IndicatorState {
public:
  /// Replays the recurrences over `closes`; needs enough history for both seeds.
  IndicatorState(std::span<const double> closes, const IndicatorParams& params);

  void push(double close);

  double rsi() const noexcept { return rsi_from_averages(avg_up_, avg_down_); }
  double ema() const noexcept { return ema_; }
  double last_close() const noexcept { return last_close_; }

private:
  IndicatorParams params_;
  double k_;
  double avg_up_ = 0.0;
  double avg_down_ = 0.0;
  double ema_ = 0.0;
  double last_close_ = 0.0;
};

} // namespace achilles
