#include "achilles/strategy.hpp"

#include "achilles/digest.hpp"
#include "achilles/error.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace achilles {

void BotConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(buy_prob_threshold) || !in_unit(sell_prob_threshold)) {
    throw Error(ErrorKind::InvalidArgument, "probability thresholds must lie in [0,1]");
  }
  if (slice_back == 0 || slice_fwd == 0 || real_window == 0 || close_top_k == 0 ||
      sentiment_refresh_minutes == 0) {
    throw Error(ErrorKind::InvalidArgument, "bot window sizes must be positive");
  }
  if (!(risk > 0.0 && risk <= 1.0)) throw Error(ErrorKind::InvalidArgument, "risk must be in (0,1]");
}

nlohmann::json BotConfig::to_json() const {
  return {{"buy_prob_threshold", buy_prob_threshold},
          {"sell_prob_threshold", sell_prob_threshold},
          {"slice_back", slice_back},
          {"slice_fwd", slice_fwd},
          {"real_window", real_window},
          {"close_top_k", close_top_k},
          {"risk", risk},
          {"sentiment_refresh_minutes", sentiment_refresh_minutes}};
}

BotConfig BotConfig::from_json(const nlohmann::json& j) {
  BotConfig c;
  static const std::set<std::string> known = {"buy_prob_threshold", "sell_prob_threshold", "slice_back",
                                              "slice_fwd", "real_window", "close_top_k", "risk",
                                              "sentiment_refresh_minutes"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(ErrorKind::InvalidArgument, fmt::format("unknown bot config key '{}'", key));
  }
  c.buy_prob_threshold = j.value("buy_prob_threshold", c.buy_prob_threshold);
  c.sell_prob_threshold = j.value("sell_prob_threshold", c.sell_prob_threshold);
  c.slice_back = j.value("slice_back", c.slice_back);
  c.slice_fwd = j.value("slice_fwd", c.slice_fwd);
  c.real_window = j.value("real_window", c.real_window);
  c.close_top_k = j.value("close_top_k", c.close_top_k);
  c.risk = j.value("risk", c.risk);
  c.sentiment_refresh_minutes = j.value("sentiment_refresh_minutes", c.sentiment_refresh_minutes);
  c.validate();
  return c;
}

PredictionSlice slice_predictions(const PredictionFrame& frame, Timestamp now, const BotConfig& config) {
  auto idx = frame.index_of(now.floor_minute());
  if (!idx) {
    throw Error(ErrorKind::Coverage, fmt::format("prediction frame does not cover {}", now.to_string()));
  }
  const std::size_t lo = *idx >= config.slice_back ? *idx - config.slice_back : 0;
  const std::size_t hi = std::min(frame.size() - 1, *idx + config.slice_fwd);
  PredictionSlice s;
  s.center = frame.entries[*idx].time;
  s.center_price = frame.entries[*idx].price;
  s.entries.assign(frame.entries.begin() + static_cast<std::ptrdiff_t>(lo),
                   frame.entries.begin() + static_cast<std::ptrdiff_t>(hi + 1));
  s.min_price = s.max_price = s.center_price;
  for (const auto& e : s.entries) {
    s.min_price = std::min(s.min_price, e.price);
    s.max_price = std::max(s.max_price, e.price);
  }
  return s;
}

RealWindow build_real_window(const BarSeries& series, Timestamp now, const BotConfig& config) {
  auto it = std::upper_bound(series.bars.begin(), series.bars.end(), now,
                             [](Timestamp t, const Bar& b) { return t < b.time; });
  const auto end = static_cast<std::size_t>(it - series.bars.begin());
  if (end == 0) throw Error(ErrorKind::Coverage, fmt::format("no real bar at or before {}", now.to_string()));
  const std::size_t begin = end > config.real_window ? end - config.real_window : 0;
  RealWindow w;
  w.time = series.bars[end - 1].time;
  for (std::size_t i = begin; i < end; ++i) w.closes.push_back(series.bars[i].close);
  w.latest_price = w.closes.back();
  auto [mn, mx] = std::minmax_element(w.closes.begin(), w.closes.end());
  w.is_now_min = w.latest_price <= *mn;
  w.is_now_max = w.latest_price >= *mx;
  return w;
}

nlohmann::json to_json(const Action& action) {
  return std::visit(
      [](const auto& a) -> nlohmann::json {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, OpenBuy>) {
          return {{"type", "open_buy"}, {"volume", a.volume}};
        } else if constexpr (std::is_same_v<T, OpenSell>) {
          return {{"type", "open_sell"}, {"volume", a.volume}};
        } else if constexpr (std::is_same_v<T, CloseOrders>) {
          return {{"type", "close"}, {"side", std::string(to_string(a.side))}, {"ids", a.ids}};
        } else {
          return {{"type", "noop"}, {"reason", a.reason}};
        }
      },
      action);
}

std::vector<Action> decide(const PredictionSlice& slice, const RealWindow& real,
                           const SentimentSnapshot& snapshot, const Account& account,
                           const BotConfig& config) {
  std::vector<Action> actions;
  if (account.count_open(Side::Buy) > 0 && slice.center_is_max() && !real.is_now_min) {
    actions.push_back(CloseOrders{Side::Buy, account.top_k_by_profit(config.close_top_k, real.latest_price, Side::Buy)});
  }
  if (account.count_open(Side::Sell) > 0 && slice.center_is_min() && !real.is_now_max) {
    actions.push_back(CloseOrders{Side::Sell, account.top_k_by_profit(config.close_top_k, real.latest_price, Side::Sell)});
  }

  const bool want_buy = snapshot.avg_sentiment > 0.0 && snapshot.avg_probability > config.buy_prob_threshold;
  const bool want_sell = snapshot.avg_sentiment < 0.0 && snapshot.avg_probability < config.sell_prob_threshold;
  if (want_buy || want_sell) {
    auto volume = position_size({account.balance(), config.risk, real.latest_price}, account.config());
    if (!volume) {
      actions.push_back(NoOp{"position size below minimum volume"});
    } else if (want_buy) {
      actions.push_back(OpenBuy{*volume});
    } else {
      actions.push_back(OpenSell{*volume});
    }
  } else if (actions.empty()) {
    actions.push_back(NoOp{"neutral"});
  }
  return actions;
}

namespace {

std::string inputs_digest(const PredictionSlice& slice, const RealWindow& real,
                          const SentimentSnapshot& snap, const Account& account) {
  std::string buf = fmt::format("{}|", slice.center.seconds);
  for (const auto& e : slice.entries) buf += fmt::format("{}:{:a},", e.time.seconds, e.price);
  buf += '|';
  for (double c : real.closes) buf += fmt::format("{:a},", c);
  buf += fmt::format("|{:a},{:a}|{:a}|", snap.avg_probability, snap.avg_sentiment, account.balance());
  for (const auto& o : account.open_orders()) buf += fmt::format("{},", o.id);
  return sha256_hex(buf).substr(0, 16);
}

} // namespace

StepOutcome step(BotState& state, Timestamp now, const PredictionFrame& frame, const BarSeries& real,
                 const SentimentProvider& sentiment, const BotConfig& config) {
  if (state.last_tick && now <= *state.last_tick) {
    throw Error(ErrorKind::InvalidArgument, "bot ticks must advance monotonically");
  }
  state.last_tick = now;
  StepOutcome out;
  out.log = {{"time", now.to_string()}};

  const auto refresh_every = static_cast<std::int64_t>(config.sentiment_refresh_minutes);
  if (!state.last_refresh || now.minutes_since(*state.last_refresh) >= refresh_every) {
    state.snapshot = snapshot_at(sentiment, now);
    state.last_refresh = now;
    ++state.refresh_count;
    out.refreshed = true;
  }
  out.log["sentiment"] = {{"avg_probability", state.snapshot.avg_probability},
                          {"avg_sentiment", state.snapshot.avg_sentiment},
                          {"cold_start", state.snapshot.cold_start},
                          {"refreshed", out.refreshed}};

  PredictionSlice slice;
  RealWindow window;
  try {
    slice = slice_predictions(frame, now, config);
    window = build_real_window(real, now, config);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Coverage) throw;
    out.actions.push_back(NoOp{e.what()});
    out.log["actions"] = nlohmann::json::array({to_json(out.actions.back())});
    out.log["reason"] = e.what();
    return out;
  }

  out.actions = decide(slice, window, state.snapshot, state.account, config);
  out.log["inputs_digest"] = inputs_digest(slice, window, state.snapshot, state.account);
  nlohmann::json acts = nlohmann::json::array();
  std::string reason;
  for (const auto& a : out.actions) {
    acts.push_back(to_json(a));
    if (const auto* c = std::get_if<CloseOrders>(&a)) {
      for (auto id : c->ids) out.events.push_back(state.account.close_order(id, window.latest_price, now));
    } else if (const auto* b = std::get_if<OpenBuy>(&a)) {
      try {
        out.events.push_back(state.account.open_order(Side::Buy, b->volume, window.latest_price, now));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Rejected) throw;
        ++out.rejected;
        reason = e.what();
      }
    } else if (const auto* s = std::get_if<OpenSell>(&a)) {
      try {
        out.events.push_back(state.account.open_order(Side::Sell, s->volume, window.latest_price, now));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Rejected) throw;
        ++out.rejected;
        reason = e.what();
      }
    } else {
      reason = std::get<NoOp>(a).reason;
    }
  }
  out.log["actions"] = acts;
  out.log["price"] = window.latest_price;
  if (!reason.empty()) out.log["reason"] = reason;
  return out;
}

} // namespace achilles
