#pragma once

#include "achilles/marketdata.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace achilles {

/// Feature columns in bar CSV order.
enum class Column { Open, High, Low, Close, Volume, Rsi, Ema };

inline constexpr std::array<Column, 7> kAllColumns = {Column::Open,   Column::High, Column::Low,
                                                      Column::Close,  Column::Volume,
                                                      Column::Rsi,    Column::Ema};

std::string_view to_string(Column column) noexcept;
Column column_from_string(std::string_view name);

/// Value of `column` at `row`; throws when an indicator is undefined there.
double column_value(const BarSeries& series, std::size_t row, Column column);

struct WindowSpec {
  std::size_t lookback = 120;
  std::vector<Column> columns{kAllColumns.begin(), kAllColumns.end()};
  Column target = Column::Close;

  std::size_t feature_count() const noexcept { return columns.size(); }
  std::size_t target_index() const;
  void validate() const;
  bool operator==(const WindowSpec&) const = default;
};

/// Per-column min-max scaling. A degenerate column (max == min) maps to 0.
class Scaler {
public:
  struct Bounds {
    double min = 0.0;
    double max = 0.0;
    bool operator==(const Bounds&) const = default;
  };

  Scaler() = default;
  explicit Scaler(std::vector<Bounds> bounds);

  std::size_t size() const noexcept { return bounds_.size(); }
  const std::vector<Bounds>& bounds() const noexcept { return bounds_; }

  double transform(std::size_t column, double value) const;
  double inverse(std::size_t column, double scaled) const;

  nlohmann::json to_json() const;
  static Scaler from_json(const nlohmann::json& j);

  bool operator==(const Scaler&) const = default;

private:
  std::vector<Bounds> bounds_;
};

/// Fits bounds over rows [begin, end) of each series (end clipped to size).
/// Rows with undefined indicators are skipped.
Scaler fit_scaler(std::span<const BarSeries> series, std::span<const Column> columns,
                  std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1));
Scaler fit_scaler(const BarSeries& series, std::span<const Column> columns,
                  std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1));

struct Sample {
  std::vector<double> x; ///< lookback x feature_count, row-major, scaled
  double y = 0.0;        ///< scaled target at the row after the window
  Timestamp target_time;
  int timeframe_minutes = 1;
};

struct SampleSet {
  WindowSpec spec;
  Scaler scaler;
  std::vector<Sample> samples;
  /// Series that were too short to yield any window.
  std::size_t short_series = 0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  /// Counts per timeframe plus scaler bounds, for audit output.
  nlohmann::json summary() const;
};

/// One scaled feature row for `row` of `series`.
std::vector<double> scaled_row(const BarSeries& series, std::size_t row, const WindowSpec& spec,
                               const Scaler& scaler);

/// Slides a lookback window over the rows where every feature is defined.
/// L usable rows yield max(L - lookback, 0) samples.
SampleSet make_windows(const BarSeries& series, const WindowSpec& spec, const Scaler& scaler);

/// Concatenates sets that share spec and scaler.
SampleSet merge(std::span<const SampleSet> sets);

/// Chronological split (stable by target time); floor(ratio * count) go to train.
std::pair<SampleSet, SampleSet> split(const SampleSet& set, double ratio);

} // namespace achilles
