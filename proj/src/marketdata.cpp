#include "achilles/marketdata.hpp"

#include "achilles/csv.hpp"
#include "achilles/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

namespace achilles {

Timeframe::Timeframe(int minutes) : minutes_(minutes) {
  if (minutes <= 0) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("timeframe must be positive, got {}", minutes));
  }
}

bool Bar::consistent() const noexcept {
  return low <= std::min(open, close) && high >= std::max(open, close) && volume >= 0.0;
}

std::vector<double> BarSeries::closes() const {
  std::vector<double> out;
  out.reserve(bars.size());
  for (const auto& b : bars) out.push_back(b.close);
  return out;
}

std::size_t BarSeries::first_complete_row() const {
  for (std::size_t i = 0; i < bars.size(); ++i) {
    bool ok = true;
    if (!rsi.empty() && !rsi[i]) ok = false;
    if (!ema.empty() && !ema[i]) ok = false;
    if (ok) return i;
  }
  return bars.size();
}

void BarSeries::validate() const {
  for (std::size_t i = 1; i < bars.size(); ++i) {
    if (bars[i].time <= bars[i - 1].time) {
      throw Error(ErrorKind::CorruptFeed,
                  fmt::format("timestamps not strictly increasing at {}", bars[i].time.to_string()));
    }
  }
  if ((!rsi.empty() && rsi.size() != bars.size()) || (!ema.empty() && ema.size() != bars.size())) {
    throw Error(ErrorKind::ShapeMismatch, "indicator columns misaligned with bars");
  }
}

double IndicatorParams::ema_k() const {
  validate();
  double x = ema_length;
  return ema_variant == EmaVariant::Paper ? 2.0 / (x - 1.0) : 2.0 / (x + 1.0);
}

void IndicatorParams::validate() const {
  if (rsi_period < 2) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("rsi_period must be >= 2, got {}", rsi_period));
  }
  int min_len = ema_variant == EmaVariant::Paper ? 3 : 2;
  if (ema_length < min_len) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("ema_length must be >= {} for this variant, got {}", min_len, ema_length));
  }
}

namespace {

constexpr std::string_view kBarHeader = "Time,Open,High,Low,Close,Volume";
constexpr std::string_view kEnrichedHeader = "Time,Open,High,Low,Close,Volume,RSI,EMA";

std::optional<double> parse_optional(std::string_view field, std::string_view what) {
  if (field.empty()) return std::nullopt;
  return csv::parse_double(field, what);
}

} // namespace

BarSeries load_bars(std::istream& source, Timeframe timeframe, const LoadOptions& options,
                    LoadStats* stats) {
  std::string line;
  if (!csv::next_line(source, line)) {
    throw Error(ErrorKind::BadInput, "bar CSV is missing its header");
  }
  std::string header;
  for (auto f : csv::split(line)) {
    if (!header.empty()) header += ',';
    header += f;
  }
  bool enriched = header == kEnrichedHeader;
  if (!enriched && header != kBarHeader) {
    throw Error(ErrorKind::BadInput, fmt::format("unexpected bar CSV header '{}'", line));
  }
  const std::size_t width = enriched ? 8 : 6;

  struct Row {
    Bar bar;
    std::optional<double> rsi, ema;
  };
  std::vector<Row> rows;
  LoadStats local;
  std::size_t line_no = 1;
  while (csv::next_line(source, line)) {
    ++line_no;
    auto fields = csv::split(line);
    if (fields.size() != width) {
      throw Error(ErrorKind::BadInput,
                  fmt::format("line {}: expected {} fields, got {}", line_no, width, fields.size()));
    }
    Row row;
    try {
      row.bar.time = Timestamp::parse(fields[0]);
      row.bar.open = csv::parse_double(fields[1], "Open");
      row.bar.high = csv::parse_double(fields[2], "High");
      row.bar.low = csv::parse_double(fields[3], "Low");
      row.bar.close = csv::parse_double(fields[4], "Close");
      row.bar.volume = csv::parse_double(fields[5], "Volume");
      if (enriched) {
        row.rsi = parse_optional(fields[6], "RSI");
        row.ema = parse_optional(fields[7], "EMA");
      }
    } catch (const Error& e) {
      throw Error(ErrorKind::BadInput, fmt::format("line {}: {}", line_no, e.what()));
    }
    if (row.bar.time.floor_minute() != row.bar.time) {
      throw Error(ErrorKind::BadInput, fmt::format("line {}: bar time is not on a minute boundary", line_no));
    }
    if (row.bar.volume < 0.0) {
      throw Error(ErrorKind::BadInput, fmt::format("line {}: negative volume", line_no));
    }
    if (!row.bar.consistent()) {
      if (options.ohlc == OhlcCheck::Reject) {
        throw Error(ErrorKind::BadInput, fmt::format("line {}: inconsistent OHLC values", line_no));
      }
      ++local.ohlc_violations;
    }
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.bar.time < b.bar.time; });

  BarSeries series;
  series.timeframe = timeframe;
  series.bars.reserve(rows.size());
  for (const auto& r : rows) series.bars.push_back(r.bar);
  if (enriched) {
    for (const auto& r : rows) {
      series.rsi.push_back(r.rsi);
      series.ema.push_back(r.ema);
    }
  }
  series.validate();
  local.rows = rows.size();
  if (stats) *stats = local;
  return series;
}

void write_bars(std::ostream& sink, const BarSeries& series) {
  series.validate();
  bool enriched = series.enriched();
  sink << (enriched ? kEnrichedHeader : kBarHeader) << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? csv::exact(*v) : std::string(); };
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& b = series.bars[i];
    sink << b.time.to_string() << ',' << csv::exact(b.open) << ',' << csv::exact(b.high) << ','
         << csv::exact(b.low) << ',' << csv::exact(b.close) << ',' << csv::exact(b.volume);
    if (enriched) sink << ',' << opt(series.rsi[i]) << ',' << opt(series.ema[i]);
    sink << '\n';
  }
  if (!sink) throw Error(ErrorKind::Io, "failed writing bar CSV");
}

Indicator smma(std::span<const double> values, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "smma period must be positive");
  const auto len = static_cast<std::size_t>(n);
  if (values.size() < len) {
    throw Error(ErrorKind::InsufficientHistory,
                fmt::format("smma needs {} values, got {}", n, values.size()));
  }
  Indicator out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < len; ++i) sum += values[i];
  double s = sum / n;
  out[len - 1] = s;
  for (std::size_t i = len; i < values.size(); ++i) {
    s = (s * (n - 1) + values[i]) / n;
    out[i] = s;
  }
  return out;
}

double rsi_from_averages(double avg_up, double avg_down) noexcept {
  double total = avg_up + avg_down;
  if (total == 0.0) return 50.0;
  if (avg_down == 0.0) return 100.0;
  return 100.0 * avg_up / total;
}

Indicator rsi(const BarSeries& series, const IndicatorParams& params) {
  params.validate();
  const auto n = static_cast<std::size_t>(params.rsi_period);
  if (series.size() < n + 1) {
    throw Error(ErrorKind::InsufficientHistory,
                fmt::format("rsi needs {} bars, got {}", n + 1, series.size()));
  }
  std::vector<double> up, down;
  up.reserve(series.size() - 1);
  down.reserve(series.size() - 1);
  for (std::size_t t = 1; t < series.size(); ++t) {
    double diff = series.bars[t].close - series.bars[t - 1].close;
    up.push_back(std::max(diff, 0.0));
    down.push_back(std::max(-diff, 0.0));
  }
  auto su = smma(up, params.rsi_period);
  auto sd = smma(down, params.rsi_period);
  Indicator out(series.size());
  for (std::size_t j = 0; j < up.size(); ++j) {
    if (su[j]) out[j + 1] = rsi_from_averages(*su[j], *sd[j]);
  }
  return out;
}

Indicator ema(const BarSeries& series, const IndicatorParams& params) {
  const double k = params.ema_k();
  const auto x = static_cast<std::size_t>(params.ema_length);
  if (series.size() < x) {
    throw Error(ErrorKind::InsufficientHistory,
                fmt::format("ema needs {} bars, got {}", x, series.size()));
  }
  Indicator out(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x; ++i) sum += series.bars[i].close;
  double e = sum / static_cast<double>(x);
  out[x - 1] = e;
  for (std::size_t t = x; t < series.size(); ++t) {
    e = series.bars[t].close * k + e * (1.0 - k);
    out[t] = e;
  }
  return out;
}

BarSeries enrich(BarSeries series, const IndicatorParams& params) {
  series.validate();
  series.rsi = rsi(series, params);
  series.ema = ema(series, params);
  return series;
}

IndicatorState::IndicatorState(std::span<const double> closes, const IndicatorParams& params)
    : params_(params), k_(params.ema_k()) {
  const auto n = static_cast<std::size_t>(params.rsi_period);
  const auto x = static_cast<std::size_t>(params.ema_length);
  if (closes.size() < std::max(n + 1, x)) {
    throw Error(ErrorKind::InsufficientHistory, "not enough closes to seed indicator state");
  }
  double up = 0.0, down = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    double diff = closes[t] - closes[t - 1];
    up += std::max(diff, 0.0);
    down += std::max(-diff, 0.0);
  }
  avg_up_ = up / static_cast<double>(n);
  avg_down_ = down / static_cast<double>(n);
  for (std::size_t t = n + 1; t < closes.size(); ++t) {
    double diff = closes[t] - closes[t - 1];
    avg_up_ = (avg_up_ * static_cast<double>(n - 1) + std::max(diff, 0.0)) / static_cast<double>(n);
    avg_down_ = (avg_down_ * static_cast<double>(n - 1) + std::max(-diff, 0.0)) / static_cast<double>(n);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x; ++i) sum += closes[i];
  ema_ = sum / static_cast<double>(x);
  for (std::size_t t = x; t < closes.size(); ++t) ema_ = closes[t] * k_ + ema_ * (1.0 - k_);
  last_close_ = closes.back();
}

void IndicatorState::push(double close) {
  const double n = params_.rsi_period;
  double diff = close - last_close_;
  avg_up_ = (avg_up_ * (n - 1) + std::max(diff, 0.0)) / n;
  avg_down_ = (avg_down_ * (n - 1) + std::max(-diff, 0.0)) / n;
  ema_ = close * k_ + ema_ * (1.0 - k_);
  last_close_ = close;
}

} // namespace achilles
