#include "achilles/error.hpp"
#include "achilles/paperbroker.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

using namespace achilles;

namespace {

const Timestamp t0 = Timestamp::from_civil(2024, 9, 2);

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

} // namespace

TEST(Sizing, WorkedExample) {
  EXPECT_DOUBLE_EQ(raw_position_size({1000.0, 0.3, 2500.0}), 0.12);
  EXPECT_DOUBLE_EQ(*position_size({1000.0, 0.3, 2500.0}), 0.12);
}

TEST(Sizing, FloorsToStep) {
  EXPECT_DOUBLE_EQ(*position_size({1000.0, 0.3, 2400.0}), 0.12); // raw 0.125
  EXPECT_DOUBLE_EQ(*position_size({100.0, 1.0, 100.0}), 1.0);   // exact multiple survives rounding
  EXPECT_FALSE(position_size({10.0, 0.3, 2500.0}).has_value()); // raw 0.0012
}

TEST(Sizing, RejectsBadInputs) {
  EXPECT_THROW(raw_position_size({1000.0, 0.3, 0.0}), Error);
  EXPECT_THROW(raw_position_size({1000.0, -0.1, 10.0}), Error);
  EXPECT_THROW(raw_position_size({-5.0, 0.3, 10.0}), Error);
}

TEST(Account, OpenCloseBuy) {
  Account acc(1000.0);
  auto open = acc.open_order(Side::Buy, 0.12, 2500.0, t0);
  EXPECT_EQ(open.order_id, 1u);
  EXPECT_EQ(open.balance, 1000.0);
  EXPECT_NEAR(acc.unrealized(2510.0), 120.0, 1e-9);
  auto close = acc.close_order(open.order_id, 2510.0, t0.plus_minutes(5));
  EXPECT_NEAR(close.realized_pnl, 120.0, 1e-9);
  EXPECT_NEAR(acc.balance(), 1120.0, 1e-9);
  EXPECT_TRUE(acc.open_orders().empty());
  ASSERT_EQ(acc.closed_orders().size(), 1u);
  EXPECT_EQ(*acc.closed_orders()[0].close_price, 2510.0);
}

TEST(Account, SellPnlIsNegated) {
  Account acc(1000.0);
  auto id = acc.open_order(Side::Sell, 0.5, 100.0, t0).order_id;
  EXPECT_NEAR(acc.unrealized(98.0), 100.0, 1e-9);
  EXPECT_NEAR(acc.close_order(id, 101.0, t0).realized_pnl, -50.0, 1e-9);
}

TEST(Account, FeeChargedAtClose) {
  BrokerConfig cfg;
  cfg.fee_per_order = 2.5;
  Account acc(1000.0, cfg);
  auto id = acc.open_order(Side::Buy, 0.01, 100.0, t0).order_id;
  EXPECT_EQ(acc.balance(), 1000.0);
  EXPECT_NEAR(acc.close_order(id, 100.0, t0).realized_pnl, -2.5, 1e-12);
}

TEST(Account, CapAndErrorsLeaveStateUntouched) {
  Account acc(1000.0);
  for (int i = 0; i < 5; ++i) acc.open_order(Side::Buy, 0.01, 100.0, t0.plus_minutes(i));
  EXPECT_EQ(kind_of([&] { acc.open_order(Side::Sell, 0.01, 100.0, t0); }), ErrorKind::Rejected);
  EXPECT_EQ(acc.open_orders().size(), 5u);
  EXPECT_EQ(kind_of([&] { acc.close_order(42, 100.0, t0); }), ErrorKind::NotFound);
  EXPECT_EQ(kind_of([&] { acc.close_order(1, -1.0, t0); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([&] { acc.close_order(3, 100.0, t0); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(acc.open_orders().size(), 5u);
  EXPECT_EQ(acc.balance(), 1000.0);
  acc.close_order(1, 100.0, t0);
  EXPECT_NO_THROW(acc.open_order(Side::Sell, 0.01, 100.0, t0));
  EXPECT_EQ(kind_of([&] { Account(1000.0).open_order(Side::Buy, 0.001, 100.0, t0); }),
            ErrorKind::InvalidArgument);
}

TEST(Account, TopKOrdering) {
  Account acc(1000.0);
  acc.open_order(Side::Buy, 0.01, 100.0, t0.plus_minutes(2)); // id 1, pnl 10 at 110
  acc.open_order(Side::Buy, 0.01, 105.0, t0.plus_minutes(1)); // id 2, pnl 5
  acc.open_order(Side::Buy, 0.01, 100.0, t0.plus_minutes(1)); // id 3, pnl 10, earlier
  acc.open_order(Side::Sell, 0.01, 120.0, t0);                // id 4, pnl 10, earliest, sell
  EXPECT_EQ(acc.top_k_by_profit(2, 110.0), (std::vector<OrderId>{4, 3}));
  EXPECT_EQ(acc.top_k_by_profit(2, 110.0, Side::Buy), (std::vector<OrderId>{3, 1}));
  EXPECT_EQ(acc.top_k_by_profit(10, 110.0, Side::Buy).size(), 3u);
  EXPECT_TRUE(acc.top_k_by_profit(2, 110.0, Side::Sell) == (std::vector<OrderId>{4}));
  EXPECT_THROW(acc.top_k_by_profit(0, 110.0), Error);
}

TEST(Account, CountsBySide) {
  Account acc(1000.0);
  acc.open_order(Side::Buy, 0.01, 1.0, t0);
  acc.open_order(Side::Sell, 0.01, 1.0, t0);
  acc.open_order(Side::Buy, 0.01, 1.0, t0);
  EXPECT_EQ(acc.count_open(Side::Buy), 2u);
  EXPECT_EQ(acc.count_open(Side::Sell), 1u);
}

TEST(TradeLog, RoundTripAndReplay) {
  std::mt19937_64 rng(77);
  Account acc(1000.0);
  std::vector<TradeEvent> events;
  double price = 2400.0;
  for (int step = 0; step < 300; ++step) {
    price += static_cast<double>(rng() % 200) / 100.0 - 0.995;
    Timestamp t = t0.plus_minutes(step);
    if (!acc.open_orders().empty() && rng() % 2 == 0) {
      events.push_back(acc.close_order(acc.open_orders()[rng() % acc.open_orders().size()].id, price, t));
    } else if (acc.open_orders().size() < 5) {
      events.push_back(acc.open_order(rng() % 2 ? Side::Buy : Side::Sell, 0.01 * (1 + rng() % 20), price, t));
    }
  }
  std::stringstream buf;
  write_trade_log(buf, events);
  auto back = read_trade_log(buf);
  EXPECT_EQ(back, events);
  auto replayed = replay_trade_log(back, 1000.0);
  EXPECT_EQ(replayed.balance(), acc.balance());
  EXPECT_EQ(replayed.open_orders().size(), acc.open_orders().size());

  back[back.size() / 2].balance += 0.01;
  EXPECT_EQ(kind_of([&] { replay_trade_log(back, 1000.0); }), ErrorKind::CorruptFeed);
}
