#include "achilles/dataset.hpp"

#include "achilles/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <fmt/format.h>

namespace achilles {

std::string_view to_string(Column column) noexcept {
  switch (column) {
  case Column::Open: return "open";
  case Column::High: return "high";
  case Column::Low: return "low";
  case Column::Close: return "close";
  case Column::Volume: return "volume";
  case Column::Rsi: return "rsi";
  case Column::Ema: return "ema";
  }
  return "?";
}

Column column_from_string(std::string_view name) {
  for (auto c : kAllColumns) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorKind::InvalidArgument, fmt::format("unknown column '{}'", name));
}

double column_value(const BarSeries& series, std::size_t row, Column column) {
  const Bar& b = series.bars.at(row);
  auto indicator = [&](const Indicator& col, std::string_view name) {
    if (col.empty() || !col[row]) {
      throw Error(ErrorKind::InsufficientHistory,
                  fmt::format("{} undefined at row {}", name, row));
    }
    return *col[row];
  };
  switch (column) {
  case Column::Open: return b.open;
  case Column::High: return b.high;
  case Column::Low: return b.low;
  case Column::Close: return b.close;
  case Column::Volume: return b.volume;
  case Column::Rsi: return indicator(series.rsi, "rsi");
  case Column::Ema: return indicator(series.ema, "ema");
  }
  return 0.0;
}

std::size_t WindowSpec::target_index() const {
  auto it = std::find(columns.begin(), columns.end(), target);
  if (it == columns.end()) {
    throw Error(ErrorKind::InvalidArgument, "target column is not among the feature columns");
  }
  return static_cast<std::size_t>(it - columns.begin());
}

void WindowSpec::validate() const {
  if (lookback < 1) throw Error(ErrorKind::InvalidArgument, "lookback must be >= 1");
  if (columns.empty()) throw Error(ErrorKind::InvalidArgument, "no feature columns");
  target_index();
}

Scaler::Scaler(std::vector<Bounds> bounds) : bounds_(std::move(bounds)) {
  for (const auto& b : bounds_) {
    if (!(b.max >= b.min) || !std::isfinite(b.min) || !std::isfinite(b.max)) {
      throw Error(ErrorKind::InvalidArgument, "scaler bounds require finite max >= min");
    }
  }
}

double Scaler::transform(std::size_t column, double value) const {
  const auto& b = bounds_.at(column);
  double range = b.max - b.min;
  if (range == 0.0) return 0.0;
  return (value - b.min) / range;
}

double Scaler::inverse(std::size_t column, double scaled) const {
  const auto& b = bounds_.at(column);
  return scaled * (b.max - b.min) + b.min;
}

nlohmann::json Scaler::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& b : bounds_) arr.push_back({{"min", b.min}, {"max", b.max}});
  return arr;
}

Scaler Scaler::from_json(const nlohmann::json& j) {
  std::vector<Bounds> bounds;
  for (const auto& e : j) bounds.push_back({e.at("min").get<double>(), e.at("max").get<double>()});
  return Scaler(std::move(bounds));
}

Scaler fit_scaler(std::span<const BarSeries> series, std::span<const Column> columns,
                  std::size_t begin, std::size_t end) {
  std::vector<Scaler::Bounds> bounds(columns.size(),
                                     {std::numeric_limits<double>::infinity(),
                                      -std::numeric_limits<double>::infinity()});
  std::vector<bool> seen(columns.size(), false);
  for (const auto& s : series) {
    const std::size_t stop = std::min(end, s.size());
    for (std::size_t row = begin; row < stop; ++row) {
      for (std::size_t c = 0; c < columns.size(); ++c) {
        double v;
        if (columns[c] == Column::Rsi || columns[c] == Column::Ema) {
          const auto& col = columns[c] == Column::Rsi ? s.rsi : s.ema;
          if (col.empty() || !col[row]) continue;
          v = *col[row];
        } else {
          v = column_value(s, row, columns[c]);
        }
        bounds[c].min = std::min(bounds[c].min, v);
        bounds[c].max = std::max(bounds[c].max, v);
        seen[c] = true;
      }
    }
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!seen[c]) {
      throw Error(ErrorKind::InsufficientHistory,
                  fmt::format("column '{}' has no defined values in the fit range",
                              to_string(columns[c])));
    }
  }
  return Scaler(std::move(bounds));
}

Scaler fit_scaler(const BarSeries& series, std::span<const Column> columns, std::size_t begin,
                  std::size_t end) {
  return fit_scaler(std::span<const BarSeries>(&series, 1), columns, begin, end);
}

nlohmann::json SampleSet::summary() const {
  std::map<int, std::size_t> per_tf;
  for (const auto& s : samples) ++per_tf[s.timeframe_minutes];
  nlohmann::json counts = nlohmann::json::object();
  for (auto [tf, n] : per_tf) counts[std::to_string(tf)] = n;
  nlohmann::json cols = nlohmann::json::array();
  for (auto c : spec.columns) cols.push_back(std::string(to_string(c)));
  return {{"samples", samples.size()},
          {"per_timeframe_minutes", counts},
          {"short_series", short_series},
          {"lookback", spec.lookback},
          {"columns", cols},
          {"target", std::string(to_string(spec.target))},
          {"scaler", scaler.to_json()}};
}

std::vector<double> scaled_row(const BarSeries& series, std::size_t row, const WindowSpec& spec,
                               const Scaler& scaler) {
  std::vector<double> out(spec.feature_count());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = scaler.transform(c, column_value(series, row, spec.columns[c]));
  }
  return out;
}

SampleSet make_windows(const BarSeries& series, const WindowSpec& spec, const Scaler& scaler) {
  spec.validate();
  if (scaler.size() != spec.feature_count()) {
    throw Error(ErrorKind::ShapeMismatch, "scaler width does not match feature count");
  }
  SampleSet set;
  set.spec = spec;
  set.scaler = scaler;
  const std::size_t first = series.first_complete_row();
  const std::size_t usable = series.size() - first;
  if (usable <= spec.lookback) {
    set.short_series = 1;
    return set;
  }
  const std::size_t width = spec.feature_count();
  std::vector<double> rows(usable * width);
  for (std::size_t r = 0; r < usable; ++r) {
    auto row = scaled_row(series, first + r, spec, scaler);
    std::copy(row.begin(), row.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  const std::size_t target = spec.target_index();
  const std::size_t count = usable - spec.lookback;
  set.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    auto begin = rows.begin() + static_cast<std::ptrdiff_t>(i * width);
    s.x.assign(begin, begin + static_cast<std::ptrdiff_t>(spec.lookback * width));
    s.y = rows[(i + spec.lookback) * width + target];
    s.target_time = series.bars[first + i + spec.lookback].time;
    s.timeframe_minutes = series.timeframe.minutes();
    set.samples.push_back(std::move(s));
  }
  return set;
}

SampleSet merge(std::span<const SampleSet> sets) {
  if (sets.empty()) throw Error(ErrorKind::InvalidArgument, "nothing to merge");
  SampleSet out;
  out.spec = sets.front().spec;
  out.scaler = sets.front().scaler;
  for (const auto& s : sets) {
    if (!(s.spec == out.spec)) {
      throw Error(ErrorKind::ShapeMismatch, "cannot merge sample sets with different window specs");
    }
    if (!(s.scaler == out.scaler)) {
      throw Error(ErrorKind::ShapeMismatch, "cannot merge sample sets with different scalers");
    }
    out.samples.insert(out.samples.end(), s.samples.begin(), s.samples.end());
    out.short_series += s.short_series;
  }
  return out;
}

std::pair<SampleSet, SampleSet> split(const SampleSet& set, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("split ratio must be in (0,1), got {}", ratio));
  }
  if (set.empty()) throw Error(ErrorKind::InvalidArgument, "cannot split an empty sample set");
  std::vector<std::size_t> order(set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.samples[a].target_time < set.samples[b].target_time;
  });
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(set.size())));
  SampleSet train, test;
  train.spec = test.spec = set.spec;
  train.scaler = test.scaler = set.scaler;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? train : test).samples.push_back(set.samples[order[k]]);
  }
  return {std::move(train), std::move(test)};
}

} // namespace achilles
