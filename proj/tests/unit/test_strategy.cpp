#include "achilles/error.hpp"
#include "achilles/strategy.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace achilles;

namespace {

const Timestamp t0 = Timestamp::from_civil(2024, 9, 2);

PredictionFrame frame_of(const std::vector<double>& prices, Timestamp start = t0) {
  PredictionFrame f;
  for (std::size_t i = 0; i < prices.size(); ++i) f.entries.push_back({start.plus_minutes(static_cast<std::int64_t>(i)), prices[i]});
  return f;
}

SentimentSnapshot snap(double prob, double sent) {
  SentimentSnapshot s;
  s.avg_probability = prob;
  s.avg_sentiment = sent;
  return s;
}

RealWindow window(double price, bool is_min, bool is_max) {
  RealWindow w;
  w.closes = {price};
  w.latest_price = price;
  w.is_now_min = is_min;
  w.is_now_max = is_max;
  return w;
}

PredictionSlice slice(double center, double lo, double hi) {
  PredictionSlice s;
  s.center_price = center;
  s.min_price = lo;
  s.max_price = hi;
  return s;
}

class FixedSentiment final : public SentimentProvider {
public:
  explicit FixedSentiment(std::vector<SourceReading> r) : r_(std::move(r)) {}
  std::vector<SourceReading> read(Timestamp t) const override {
    std::vector<SourceReading> out;
    for (auto r : r_)
      if (r.time <= t) out.push_back(r);
    return out;
  }

private:
  std::vector<SourceReading> r_;
};

} // namespace

TEST(BotConfig, JsonRoundTripAndValidation) {
  BotConfig c;
  c.risk = 0.25;
  auto back = BotConfig::from_json(c.to_json());
  EXPECT_EQ(back.risk, 0.25);
  EXPECT_EQ(back.real_window, 17u);
  EXPECT_THROW(BotConfig::from_json({{"riks", 0.3}}), Error);
  EXPECT_THROW(BotConfig::from_json({{"risk", 0.0}}), Error);
  EXPECT_THROW(BotConfig::from_json({{"buy_prob_threshold", 1.5}}), Error);
  EXPECT_EQ(BotConfig::from_json(nlohmann::json::object()).slice_back, 10u);
}

TEST(Slice, TwentyOnePointsAroundCenter) {
  std::vector<double> prices;
  for (int i = 0; i < 40; ++i) prices.push_back(100.0 + i);
  auto f = frame_of(prices);
  auto s = slice_predictions(f, t0.plus_minutes(20), BotConfig{});
  EXPECT_EQ(s.entries.size(), 21u);
  EXPECT_EQ(s.entries.front().time, t0.plus_minutes(10));
  EXPECT_EQ(s.entries.back().time, t0.plus_minutes(30));
  EXPECT_EQ(s.center_price, 120.0);
  EXPECT_EQ(s.min_price, 110.0);
  EXPECT_EQ(s.max_price, 130.0);
  EXPECT_FALSE(s.center_is_max());
}

TEST(Slice, ClipsAtEdgesAndFloorsNow) {
  auto f = frame_of({5, 4, 3, 2, 1});
  auto s = slice_predictions(f, t0.plus_minutes(1), BotConfig{});
  EXPECT_EQ(s.entries.size(), 5u);
  EXPECT_TRUE(s.center_is_max() == false);
  auto head = slice_predictions(f, Timestamp{t0.seconds + 30}, BotConfig{});
  EXPECT_EQ(head.center_price, 5.0);
  EXPECT_TRUE(head.center_is_max());
}

TEST(Slice, CoverageError) {
  auto f = frame_of({1, 2, 3});
  try {
    slice_predictions(f, t0.plus_minutes(3), BotConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Coverage);
  }
}

TEST(Slice, FlatSliceIsBothExtremes) {
  auto s = slice_predictions(frame_of(std::vector<double>(21, 7.0)), t0.plus_minutes(10), BotConfig{});
  EXPECT_TRUE(s.center_is_max());
  EXPECT_TRUE(s.center_is_min());
}

TEST(RealWindowTest, FlagsAndLength) {
  std::vector<double> closes;
  for (int i = 0; i < 30; ++i) closes.push_back(50.0 - i);
  auto series = oracle::series_from_closes(closes, t0);
  auto w = build_real_window(series, t0.plus_minutes(29), BotConfig{});
  EXPECT_EQ(w.closes.size(), 17u);
  EXPECT_EQ(w.latest_price, 21.0);
  EXPECT_TRUE(w.is_now_min);
  EXPECT_FALSE(w.is_now_max);
  auto early = build_real_window(series, t0.plus_minutes(3), BotConfig{});
  EXPECT_EQ(early.closes.size(), 4u);
  EXPECT_THROW(build_real_window(series, t0.plus_minutes(-1), BotConfig{}), Error);
}

TEST(Decide, EntryThresholdsAreStrict) {
  Account acc(1000.0);
  BotConfig c;
  auto w = window(2500.0, false, false);
  auto s = slice(1, 0, 2);
  EXPECT_EQ(decide(s, w, snap(0.9, 1.0), acc, c), (std::vector<Action>{OpenBuy{0.12}}));
  EXPECT_EQ(decide(s, w, snap(0.87, 1.0), acc, c), (std::vector<Action>{NoOp{"neutral"}}));
  EXPECT_EQ(decide(s, w, snap(0.9, 0.0), acc, c), (std::vector<Action>{NoOp{"neutral"}}));
  EXPECT_EQ(decide(s, w, snap(0.3, -1.0), acc, c), (std::vector<Action>{OpenSell{0.12}}));
  EXPECT_EQ(decide(s, w, snap(0.5, -1.0), acc, c), (std::vector<Action>{NoOp{"neutral"}}));
  EXPECT_EQ(decide(s, w, snap(0.3, 1.0), acc, c), (std::vector<Action>{NoOp{"neutral"}}));
}

TEST(Decide, SizeBelowMinimum) {
  Account acc(10.0);
  auto acts = decide(slice(1, 0, 2), window(2500.0, false, false), snap(0.95, 1.0), acc, BotConfig{});
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(std::get<NoOp>(acts[0]).reason, "position size below minimum volume");
}

TEST(Decide, ExitBuysAtPredictedPeak) {
  Account acc(1000.0);
  acc.open_order(Side::Buy, 0.01, 100.0, t0);
  acc.open_order(Side::Buy, 0.01, 90.0, t0);
  acc.open_order(Side::Buy, 0.01, 95.0, t0);
  BotConfig c;
  auto peak = slice(10, 5, 10);
  auto acts = decide(peak, window(110.0, false, false), snap(0.5, 0.0), acc, c);
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(std::get<CloseOrders>(acts[0]), (CloseOrders{Side::Buy, {2, 3}}));
  // Real price at its window low blocks the exit.
  EXPECT_EQ(decide(peak, window(110.0, true, false), snap(0.5, 0.0), acc, c), (std::vector<Action>{NoOp{"neutral"}}));
  // Not a peak.
  EXPECT_EQ(decide(slice(9, 5, 10), window(110.0, false, false), snap(0.5, 0.0), acc, c).size(), 1u);
}

TEST(Decide, ExitSellsAtPredictedTroughThenEnter) {
  Account acc(1000.0);
  acc.open_order(Side::Sell, 0.01, 100.0, t0);
  auto acts = decide(slice(5, 5, 10), window(100.0, false, false), snap(0.95, 1.0), acc, BotConfig{});
  ASSERT_EQ(acts.size(), 2u);
  EXPECT_EQ(std::get<CloseOrders>(acts[0]).side, Side::Sell);
  EXPECT_TRUE(std::holds_alternative<OpenBuy>(acts[1]));
  EXPECT_TRUE(decide(slice(5, 5, 10), window(100.0, false, true), snap(0.5, 0.0), acc, BotConfig{}).size() == 1);
}

TEST(Decide, FlatSliceClosesBothSides) {
  Account acc(1000.0);
  acc.open_order(Side::Sell, 0.01, 100.0, t0);
  acc.open_order(Side::Buy, 0.01, 100.0, t0);
  auto acts = decide(slice(7, 7, 7), window(100.0, false, false), snap(0.5, 0.0), acc, BotConfig{});
  ASSERT_EQ(acts.size(), 2u);
  EXPECT_EQ(std::get<CloseOrders>(acts[0]).side, Side::Buy);
  EXPECT_EQ(std::get<CloseOrders>(acts[1]).side, Side::Sell);
}

TEST(Step, RefreshCadenceAndExecution) {
  std::vector<double> closes;
  for (int i = 0; i < 120; ++i) closes.push_back(2500.0 + 0.01 * i);
  auto real = oracle::series_from_closes(closes, t0);
  auto frame = frame_of(std::vector<double>(120, 2500.0), t0);
  FixedSentiment feed({{"a", t0, 0.9, SentimentLabel::Positive}});
  BotState st{Account(1000.0), {}, {}, {}, 0};
  BotConfig c;
  std::size_t opens = 0, rejected = 0;
  for (int m = 0; m < 31; ++m) {
    auto out = step(st, t0.plus_minutes(m), frame, real, feed, c);
    EXPECT_EQ(out.refreshed, m % 15 == 0) << m;
    EXPECT_TRUE(out.log.contains("time"));
    for (const auto& e : out.events) opens += e.kind == TradeEventKind::Open;
    rejected += out.rejected;
  }
  EXPECT_EQ(st.refresh_count, 3u);
  // A flat slice is always a predicted peak and the rising real price is never
  // at its window low, so every minute after the first closes what is open.
  EXPECT_EQ(opens, 31u);
  EXPECT_EQ(st.account.open_orders().size(), 1u);
  EXPECT_EQ(rejected, 0u);
  EXPECT_THROW(step(st, t0.plus_minutes(30), frame, real, feed, c), Error);
}

TEST(Step, CapRejectionsAreCounted) {
  std::vector<double> closes;
  for (int i = 0; i < 60; ++i) closes.push_back(2500.0 - i);
  auto real = oracle::series_from_closes(closes, t0);
  std::vector<double> rising;
  for (int i = 0; i < 60; ++i) rising.push_back(2500.0 + i);
  auto frame = frame_of(rising, t0);
  FixedSentiment feed({{"a", t0, 0.9, SentimentLabel::Positive}});
  BotState st{Account(1000.0), {}, {}, {}, 0};
  std::size_t rejected = 0;
  for (int m = 0; m < 8; ++m) rejected += step(st, t0.plus_minutes(m), frame, real, feed, BotConfig{}).rejected;
  EXPECT_EQ(st.account.open_orders().size(), 5u);
  EXPECT_EQ(rejected, 3u);
}

TEST(Step, MissingCoverageIsLoggedNoOp) {
  auto real = oracle::series_from_closes(std::vector<double>(10, 100.0), t0);
  auto frame = frame_of({100.0}, t0.plus_minutes(50));
  FixedSentiment feed({});
  BotState st{Account(1000.0), {}, {}, {}, 0};
  auto out = step(st, t0.plus_minutes(5), frame, real, feed, BotConfig{});
  ASSERT_EQ(out.actions.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<NoOp>(out.actions[0]));
  EXPECT_TRUE(st.snapshot.cold_start);
  EXPECT_TRUE(out.log.contains("reason"));
}
