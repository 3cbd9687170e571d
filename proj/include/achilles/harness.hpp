#pragma once

#include "achilles/forecaster.hpp"
#include "achilles/paperbroker.hpp"
#include "achilles/sentiment.hpp"
#include "achilles/strategy.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace achilles {

enum class PredictionMode {
  Frame,   ///< a precomputed frame (stacked rollout or fixture) covers the range
  Refresh, ///< re-seed the model with real bars every minute
};

struct BacktestConfig {
  std::string training_symbol = "ETH-USD";
  std::string trading_symbol = "XAUUSD";
  Timestamp start;
  Timestamp end; ///< exclusive
  double initial_balance = 1000.0;
  BotConfig bot;
  BrokerConfig broker;
  PredictionMode prediction_mode = PredictionMode::Refresh;
  bool force_close_at_end = true;

  std::filesystem::path bars_path;        ///< real trading bars
  std::filesystem::path predictions_path; ///< Frame mode
  std::filesystem::path model_path;       ///< Refresh mode
  std::filesystem::path pipeline_path;    ///< Refresh mode: window spec, scaler, indicators
  std::filesystem::path sentiment_path;   ///< Time,Source,Probability,Label
  std::filesystem::path headlines_path;   ///< alternative: Time,Source,Headline scored by lexicon

  void validate() const;
  nlohmann::json to_json() const;
  /// Relative paths resolve against `base_dir`. `start`/`end` accept full
  /// timestamps; a bare `end` date is inclusive of that whole day.
  static BacktestConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

struct DailyPnl {
  std::string date; ///< YYYY-MM-DD
  double pnl = 0.0;
};

struct EquityPoint {
  Timestamp time;
  double balance = 0.0;
  double equity = 0.0;
};

struct BacktestReport {
  double initial_balance = 0.0;
  double final_balance = 0.0;
  std::vector<DailyPnl> daily; ///< days on which at least one order closed
  std::vector<EquityPoint> equity;
  std::vector<TradeEvent> trades;
  std::vector<nlohmann::json> decisions;
  std::size_t round_trips = 0;
  std::size_t steps = 0;
  std::size_t sentiment_refreshes = 0;
  std::size_t force_closed = 0;
  std::size_t rejected_orders = 0;
  std::optional<MetricsReport> metrics;
  std::vector<std::string> warnings;

  double total_pnl() const noexcept { return final_balance - initial_balance; }
  nlohmann::json summary() const;
};

/// Supplies the prediction frame seen at each minute.
class PredictionSource {
public:
  virtual ~PredictionSource() = default;
  virtual PredictionFrame frame_at(const BarSeries& real, Timestamp now) = 0;
  /// First minute in `minutes` with no coverage, if any is known up front.
  virtual std::optional<Timestamp> first_uncovered(const std::vector<Timestamp>& minutes) const;
};

class StaticFrameSource final : public PredictionSource {
public:
  explicit StaticFrameSource(PredictionFrame frame) : frame_(std::move(frame)) {}
  PredictionFrame frame_at(const BarSeries&, Timestamp) override { return frame_; }
  const PredictionFrame& frame() const noexcept { return frame_; }
  std::optional<Timestamp> first_uncovered(const std::vector<Timestamp>& minutes) const override;

private:
  PredictionFrame frame_;
};

class RefreshFrameSource final : public PredictionSource {
public:
  explicit RefreshFrameSource(RefreshForecaster forecaster) : forecaster_(std::move(forecaster)) {}
  PredictionFrame frame_at(const BarSeries& real, Timestamp now) override {
    return forecaster_.frame_at(real, now);
  }

private:
  RefreshForecaster forecaster_;
};

/// Weekday minutes in [start, end).
std::vector<Timestamp> trading_minutes(Timestamp start, Timestamp end);

/// Simulated clock over the trading minutes: one bot step per weekday minute,
/// optional force-close of what is still open at the end.
BacktestReport run_backtest(const BacktestConfig& config, const BarSeries& real,
                            PredictionSource& predictions, const SentimentProvider& sentiment);

/// Loads every input named in `config` and runs it.
BacktestReport run_backtest(const BacktestConfig& config);

/// Writes trades.csv, daily_pnl.csv, equity.csv, summary.json, decisions.jsonl
/// and waterfall.svg into `dir`.
void emit_report(const BacktestReport& report, const std::filesystem::path& dir);

void write_daily_pnl(std::ostream& sink, const std::vector<DailyPnl>& daily);
std::string waterfall_svg(const std::vector<DailyPnl>& daily);

/// Groups realized pnl of close events by calendar day.
std::vector<DailyPnl> daily_pnl_from_trades(const std::vector<TradeEvent>& trades);

} // namespace achilles
