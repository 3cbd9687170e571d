#include "achilles/forecaster.hpp"

#include "achilles/csv.hpp"
#include "achilles/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace achilles {

std::optional<std::size_t> PredictionFrame::index_of(Timestamp t) const {
  if (entries.empty()) return std::nullopt;
  const Timestamp first = entries.front().time;
  if (t < first || (t.seconds - first.seconds) % Timestamp::kMinute != 0) return std::nullopt;
  auto idx = static_cast<std::size_t>(t.minutes_since(first));
  if (idx >= entries.size()) return std::nullopt;
  return idx;
}

void PredictionFrame::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!std::isfinite(e.price) || e.price <= 0.0) {
      throw Error(ErrorKind::BadInput,
                  fmt::format("prediction at {} is not a positive finite price", e.time.to_string()));
    }
    if (i > 0 && e.time != entries[i - 1].time.plus_minutes(1)) {
      throw Error(ErrorKind::CorruptFeed,
                  fmt::format("prediction frame is not minute-spaced at {}", e.time.to_string()));
    }
  }
}

nlohmann::json to_json(const FeaturePipeline& pipeline) {
  nlohmann::json cols = nlohmann::json::array();
  for (auto c : pipeline.spec.columns) cols.push_back(std::string(to_string(c)));
  return {{"lookback", pipeline.spec.lookback},
          {"columns", cols},
          {"target", std::string(to_string(pipeline.spec.target))},
          {"scaler", pipeline.scaler.to_json()},
          {"rsi_period", pipeline.indicators.rsi_period},
          {"ema_length", pipeline.indicators.ema_length},
          {"ema_variant", pipeline.indicators.ema_variant == EmaVariant::Paper ? "paper" : "standard"}};
}

FeaturePipeline pipeline_from_json(const nlohmann::json& j) {
  FeaturePipeline p;
  p.spec.lookback = j.at("lookback").get<std::size_t>();
  p.spec.columns.clear();
  for (const auto& c : j.at("columns")) p.spec.columns.push_back(column_from_string(c.get<std::string>()));
  p.spec.target = column_from_string(j.at("target").get<std::string>());
  p.spec.validate();
  p.scaler = Scaler::from_json(j.at("scaler"));
  if (p.scaler.size() != p.spec.feature_count()) {
    throw Error(ErrorKind::ShapeMismatch, "pipeline scaler width does not match its columns");
  }
  p.indicators.rsi_period = j.at("rsi_period").get<int>();
  p.indicators.ema_length = j.at("ema_length").get<int>();
  auto variant = j.at("ema_variant").get<std::string>();
  if (variant != "paper" && variant != "standard") {
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown ema_variant '{}'", variant));
  }
  p.indicators.ema_variant = variant == "paper" ? EmaVariant::Paper : EmaVariant::Standard;
  p.indicators.validate();
  return p;
}

namespace {

struct RolloutSeed {
  std::deque<std::vector<double>> window; ///< scaled feature rows, oldest first
  std::deque<double> volumes;             ///< raw volumes, most recent last
  IndicatorState state;
};

std::vector<double> synth_row(double price, double volume, const IndicatorState& state,
                              const FeaturePipeline& p) {
  std::vector<double> row(p.spec.feature_count());
  for (std::size_t c = 0; c < row.size(); ++c) {
    double raw = 0.0;
    switch (p.spec.columns[c]) {
    case Column::Open:
    case Column::High:
    case Column::Low:
    case Column::Close: raw = price; break;
    case Column::Volume: raw = volume; break;
    case Column::Rsi: raw = state.rsi(); break;
    case Column::Ema: raw = state.ema(); break;
    }
    row[c] = p.scaler.transform(c, raw);
  }
  return row;
}

/// Runs `horizon` stacked steps; optionally records the synthesized bars.
PredictionFrame run(const Predictor& model, RolloutSeed seed, const FeaturePipeline& p,
                    std::size_t horizon, std::size_t volume_window, Timestamp start,
                    BarSeries* extended) {
  PredictionFrame frame;
  frame.entries.reserve(horizon);
  const std::size_t target = p.spec.target_index();
  const std::size_t width = p.spec.feature_count();
  std::vector<double> flat(p.spec.lookback * width);
  for (std::size_t step = 0; step < horizon; ++step) {
    for (std::size_t r = 0; r < seed.window.size(); ++r) {
      std::copy(seed.window[r].begin(), seed.window[r].end(),
                flat.begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    double scaled = 0.0;
    try {
      scaled = model.predict(flat);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      scaled = std::numeric_limits<double>::quiet_NaN();
    }
    double price = p.scaler.inverse(target, scaled);
    if (!std::isfinite(price) || price <= 0.0) {
      frame.truncated = true;
      frame.truncation_reason =
          fmt::format("non-finite or non-positive prediction at step {}", step);
      break;
    }
    const Timestamp t = start.plus_minutes(static_cast<std::int64_t>(step));
    double volume = 0.0;
    for (double v : seed.volumes) volume += v;
    volume /= static_cast<double>(seed.volumes.size());
    seed.state.push(price);
    frame.entries.push_back({t, price});
    if (extended) {
      extended->bars.push_back({t, price, price, price, price, volume});
      extended->rsi.push_back(seed.state.rsi());
      extended->ema.push_back(seed.state.ema());
    }
    seed.window.pop_front();
    seed.window.push_back(synth_row(price, volume, seed.state, p));
    seed.volumes.push_back(volume);
    while (seed.volumes.size() > volume_window) seed.volumes.pop_front();
  }
  return frame;
}

RolloutSeed seed_from(const BarSeries& series, std::size_t end, const FeaturePipeline& p,
                      std::size_t volume_window, IndicatorState state) {
  const std::size_t first = series.first_complete_row();
  if (end < first || end - first < p.spec.lookback) {
    throw Error(ErrorKind::InsufficientHistory,
                fmt::format("rollout needs {} fully defined rows before the forecast start, has {}",
                            p.spec.lookback, end < first ? 0 : end - first));
  }
  RolloutSeed seed{{}, {}, std::move(state)};
  for (std::size_t r = end - p.spec.lookback; r < end; ++r) {
    seed.window.push_back(scaled_row(series, r, p.spec, p.scaler));
  }
  const std::size_t vstart = end > volume_window ? end - volume_window : 0;
  for (std::size_t r = vstart; r < end; ++r) seed.volumes.push_back(series.bars[r].volume);
  return seed;
}

} // namespace

RolloutResult rollout_detailed(const Predictor& model, const BarSeries& seed,
                               const FeaturePipeline& pipeline, const RolloutConfig& config,
                               std::optional<Timestamp> start) {
  pipeline.spec.validate();
  if (config.synthetic_volume_window == 0) {
    throw Error(ErrorKind::InvalidArgument, "synthetic_volume_window must be positive");
  }
  if (!seed.enriched()) throw Error(ErrorKind::InvalidArgument, "rollout seed must be enriched");
  if (pipeline.scaler.size() != pipeline.spec.feature_count()) {
    throw Error(ErrorKind::ShapeMismatch, "scaler width does not match feature count");
  }
  auto closes = seed.closes();
  auto s = seed_from(seed, seed.size(), pipeline, config.synthetic_volume_window,
                     IndicatorState(closes, pipeline.indicators));
  const Timestamp t0 = start ? start->floor_minute() : seed.bars.back().time.floor_minute().plus_minutes(1);
  RolloutResult result;
  result.extended = seed;
  result.frame = run(model, std::move(s), pipeline, config.horizon, config.synthetic_volume_window,
                     t0, &result.extended);
  return result;
}

PredictionFrame rollout(const Predictor& model, const BarSeries& seed,
                        const FeaturePipeline& pipeline, const RolloutConfig& config,
                        std::optional<Timestamp> start) {
  return rollout_detailed(model, seed, pipeline, config, start).frame;
}

double mae(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.empty() || actual.size() != predicted.size()) {
    throw Error(ErrorKind::InvalidArgument, "mae needs equal, non-empty sequences");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - predicted[i]);
  return sum / static_cast<double>(actual.size());
}

double mape(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.empty() || actual.size() != predicted.size()) {
    throw Error(ErrorKind::InvalidArgument, "mape needs equal, non-empty sequences");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) throw Error(ErrorKind::InvalidArgument, "mape undefined for a zero actual");
    sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
  }
  return sum / static_cast<double>(actual.size());
}

MetricsReport evaluate(const Predictor& model, const SampleSet& test_set) {
  if (test_set.empty()) throw Error(ErrorKind::InvalidArgument, "empty test set");
  const std::size_t target = test_set.spec.target_index();
  std::vector<double> pred, truth, pred_raw, truth_raw;
  for (const auto& s : test_set.samples) {
    double p = model.predict(s.x);
    pred.push_back(p);
    truth.push_back(s.y);
    pred_raw.push_back(test_set.scaler.inverse(target, p));
    truth_raw.push_back(test_set.scaler.inverse(target, s.y));
  }
  return {loss_mse(pred, truth), mae(truth_raw, pred_raw), mape(truth_raw, pred_raw), pred.size()};
}

void write_predictions(std::ostream& sink, const PredictionFrame& frame) {
  sink << "Date,Price\n";
  for (const auto& e : frame.entries) sink << e.time.to_string() << ',' << fmt::format("{:.6f}", e.price) << '\n';
  if (!sink) throw Error(ErrorKind::Io, "failed writing prediction CSV");
}

PredictionFrame read_predictions(std::istream& source) {
  std::string line;
  if (!csv::next_line(source, line)) throw Error(ErrorKind::BadInput, "prediction CSV is missing its header");
  auto header = csv::split(line);
  if (header.size() != 2 || header[0] != "Date" || header[1] != "Price") {
    throw Error(ErrorKind::BadInput, fmt::format("unexpected prediction CSV header '{}'", line));
  }
  PredictionFrame frame;
  while (csv::next_line(source, line)) {
    auto f = csv::split(line);
    if (f.size() != 2) throw Error(ErrorKind::BadInput, fmt::format("malformed prediction row '{}'", line));
    frame.entries.push_back({Timestamp::parse(f[0]).floor_minute(), csv::parse_double(f[1], "Price")});
  }
  frame.validate();
  return frame;
}

RefreshForecaster::RefreshForecaster(const Predictor& model, FeaturePipeline pipeline,
                                     std::size_t back, std::size_t forward, std::size_t volume_window)
    : model_(model), pipeline_(std::move(pipeline)), back_(back), forward_(forward),
      volume_window_(volume_window) {
  pipeline_.spec.validate();
  if (volume_window_ == 0) throw Error(ErrorKind::InvalidArgument, "volume window must be positive");
}

PredictionFrame RefreshForecaster::frame_at(const BarSeries& real, Timestamp now) {
  now = now.floor_minute();
  if (!real.enriched()) throw Error(ErrorKind::InvalidArgument, "real series must be enriched");
  auto it = std::lower_bound(real.bars.begin(), real.bars.end(), now,
                             [](const Bar& b, Timestamp t) { return b.time < t; });
  const auto end = static_cast<std::size_t>(it - real.bars.begin());
  if (end < consumed_) throw Error(ErrorKind::InvalidArgument, "refresh forecaster moved backwards in time");

  if (!state_) {
    std::vector<double> closes;
    for (std::size_t i = 0; i < end; ++i) closes.push_back(real.bars[i].close);
    state_.emplace(closes, pipeline_.indicators);
  } else {
    for (std::size_t i = consumed_; i < end; ++i) state_->push(real.bars[i].close);
  }
  consumed_ = end;

  auto seed = seed_from(real, end, pipeline_, volume_window_, *state_);
  PredictionFrame fresh = run(model_, std::move(seed), pipeline_, forward_ + 1, volume_window_, now, nullptr);

  while (!history_.empty() && history_.back().time >= now) history_.pop_back();
  if (!fresh.empty()) history_.push_back(fresh.entries.front());

  PredictionFrame frame;
  // Contiguous run of recorded one-step forecasts ending at now - 1.
  const std::size_t hist_end = history_.size() - (fresh.empty() ? 0 : 1);
  std::size_t take = 0;
  while (take < back_ && take < hist_end &&
         history_[hist_end - 1 - take].time == now.plus_minutes(-static_cast<std::int64_t>(take) - 1)) {
    ++take;
  }
  for (std::size_t k = hist_end - take; k < hist_end; ++k) frame.entries.push_back(history_[k]);
  frame.entries.insert(frame.entries.end(), fresh.entries.begin(), fresh.entries.end());
  frame.truncated = fresh.truncated;
  frame.truncation_reason = fresh.truncation_reason;
  if (history_.size() > 4 * (back_ + 1)) {
    history_.erase(history_.begin(), history_.end() - static_cast<std::ptrdiff_t>(2 * (back_ + 1)));
  }
  return frame;
}

} // namespace achilles
