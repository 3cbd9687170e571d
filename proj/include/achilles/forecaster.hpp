#pragma once

#include "achilles/dataset.hpp"
#include "achilles/marketdata.hpp"
#include "achilles/model.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace achilles {

/// Maps one scaled window (lookback x features, row-major) to a scaled target.
class Predictor {
public:
  virtual ~Predictor() = default;
  virtual double predict(std::span<const double> window) const = 0;
};

class LstmPredictor final : public Predictor {
public:
  explicit LstmPredictor(ModelParams params) : params_(std::move(params)) {}
  double predict(std::span<const double> window) const override { return forward(params_, window); }
  const ModelParams& params() const noexcept { return params_; }

private:
  ModelParams params_;
};

/// Adapts any callable; handy for stub models.
class FunctionPredictor final : public Predictor {
public:
  explicit FunctionPredictor(std::function<double(std::span<const double>)> fn) : fn_(std::move(fn)) {}
  double predict(std::span<const double> window) const override { return fn_(window); }

private:
  std::function<double(std::span<const double>)> fn_;
};

struct PredictionEntry {
  Timestamp time;
  double price = 0.0;
  bool operator==(const PredictionEntry&) const = default;
};

/// Minute-spaced price predictions in raw quote units.
struct PredictionFrame {
  std::vector<PredictionEntry> entries;
  bool truncated = false;
  std::string truncation_reason;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
  /// Index of the entry at `t`, if the frame covers it.
  std::optional<std::size_t> index_of(Timestamp t) const;
  /// One-minute spacing, finite positive prices.
  void validate() const;
};

struct RolloutConfig {
  std::size_t horizon = 0;
  std::size_t synthetic_volume_window = 20;
};

/// Everything a rollout needs besides the bars themselves.
struct FeaturePipeline {
  WindowSpec spec;
  Scaler scaler;
  IndicatorParams indicators;
};

nlohmann::json to_json(const FeaturePipeline& pipeline);
FeaturePipeline pipeline_from_json(const nlohmann::json& j);

struct RolloutResult {
  PredictionFrame frame;
  /// Seed bars followed by the synthesized ones, with the indicator values
  /// the rollout computed incrementally.
  BarSeries extended;
};

/// Stacked prediction: each predicted close becomes a flat synthetic bar
/// (open = high = low = close, trailing-mean volume, indicators advanced by
/// their recurrences) and is fed back for the next minute. Entries start one
/// minute after the last seed bar unless `start` is given.
RolloutResult rollout_detailed(const Predictor& model, const BarSeries& seed,
                               const FeaturePipeline& pipeline, const RolloutConfig& config,
                               std::optional<Timestamp> start = std::nullopt);

PredictionFrame rollout(const Predictor& model, const BarSeries& seed,
                        const FeaturePipeline& pipeline, const RolloutConfig& config,
                        std::optional<Timestamp> start = std::nullopt);

double mae(std::span<const double> actual, std::span<const double> predicted);
double mape(std::span<const double> actual, std::span<const double> predicted);

struct MetricsReport {
  double mse = 0.0;  ///< scaled units
  double mae = 0.0;  ///< raw price units
  double mape = 0.0; ///< fraction
  std::size_t count = 0;
};

/// One-step-ahead metrics over a test set.
MetricsReport evaluate(const Predictor& model, const SampleSet& test_set);

/// `Date,Price` with six decimals.
void write_predictions(std::ostream& sink, const PredictionFrame& frame);
/// Timestamps are floored to the minute.
PredictionFrame read_predictions(std::istream& source);

/// Forecasts that are re-seeded with real bars every minute. At `now` the
/// seed is every real bar strictly before `now`; a fresh rollout supplies
/// `now .. now + forward`, and the earlier one-step forecasts recorded at
/// previous minutes supply `now - back .. now - 1`.
class RefreshForecaster {
public:
  RefreshForecaster(const Predictor& model, FeaturePipeline pipeline, std::size_t back,
                    std::size_t forward, std::size_t volume_window = 20);

  /// `real` must be enriched and must not change between calls except by
  /// appending bars. Calls must be made with non-decreasing `now`.
  PredictionFrame frame_at(const BarSeries& real, Timestamp now);

private:
  const Predictor& model_;
  FeaturePipeline pipeline_;
  std::size_t back_;
  std::size_t forward_;
  std::size_t volume_window_;
  std::vector<PredictionEntry> history_;
  std::optional<IndicatorState> state_;
  std::size_t consumed_ = 0; ///< real bars folded into state_
};

} // namespace achilles
