#pragma once

#include "achilles/forecaster.hpp"
#include "achilles/marketdata.hpp"
#include "achilles/paperbroker.hpp"
#include "achilles/sentiment.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace achilles {

struct BotConfig {
  double buy_prob_threshold = 0.87;
  double sell_prob_threshold = 0.5;
  std::size_t slice_back = 10;
  std::size_t slice_fwd = 10;
  std::size_t real_window = 17;
  std::size_t close_top_k = 2;
  double risk = 0.3;
  std::size_t sentiment_refresh_minutes = 15;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static BotConfig from_json(const nlohmann::json& j);
};

/// Predictions around `center`: up to slice_back before and slice_fwd after,
/// center included, clipped at the frame edges.
struct PredictionSlice {
  Timestamp center;
  std::vector<PredictionEntry> entries;
  double center_price = 0.0;
  double min_price = 0.0;
  double max_price = 0.0;

  bool center_is_max() const noexcept { return center_price >= max_price; }
  bool center_is_min() const noexcept { return center_price <= min_price; }
};

PredictionSlice slice_predictions(const PredictionFrame& frame, Timestamp now, const BotConfig& config);

/// The last real_window closes up to and including `now`.
struct RealWindow {
  Timestamp time; ///< time of the latest real bar
  std::vector<double> closes;
  double latest_price = 0.0;
  bool is_now_min = false; ///< latest <= every close in the window
  bool is_now_max = false; ///< latest >= every close in the window
};

RealWindow build_real_window(const BarSeries& series, Timestamp now, const BotConfig& config);

struct OpenBuy {
  double volume;
  bool operator==(const OpenBuy&) const = default;
};
struct OpenSell {
  double volume;
  bool operator==(const OpenSell&) const = default;
};
struct CloseOrders {
  Side side;
  std::vector<OrderId> ids;
  bool operator==(const CloseOrders&) const = default;
};
struct NoOp {
  std::string reason;
  bool operator==(const NoOp&) const = default;
};
using Action = std::variant<OpenBuy, OpenSell, CloseOrders, NoOp>;

nlohmann::json to_json(const Action& action);

/// Rules, in order: exit buys when the center prediction is the slice maximum
/// and the real price is not at its window low; exit sells symmetrically;
/// then at most one entry from the sentiment snapshot (buy needs positive
/// sentiment and probability above the buy threshold, sell needs negative
/// sentiment and probability below the sell threshold). Entries are sized
/// with the latest real price. Pure.
std::vector<Action> decide(const PredictionSlice& slice, const RealWindow& real,
                           const SentimentSnapshot& snapshot, const Account& account,
                           const BotConfig& config);

struct BotState {
  Account account;
  SentimentSnapshot snapshot;
  std::optional<Timestamp> last_refresh;
  std::optional<Timestamp> last_tick;
  std::size_t refresh_count = 0;
};

struct StepOutcome {
  std::vector<Action> actions;
  std::vector<TradeEvent> events;
  nlohmann::json log; ///< one decision-log record
  bool refreshed = false;
  std::size_t rejected = 0; ///< entries refused by the open-order cap
};

/// One minute of the bot: refresh sentiment when due, slice, decide, and
/// execute against the account at the latest real price. `frame` must cover
/// `now` (missing coverage becomes a logged NoOp).
StepOutcome step(BotState& state, Timestamp now, const PredictionFrame& frame, const BarSeries& real,
                 const SentimentProvider& sentiment, const BotConfig& config);

} // namespace achilles
