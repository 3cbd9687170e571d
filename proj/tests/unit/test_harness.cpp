#include "achilles/error.hpp"
#include "achilles/harness.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

using namespace achilles;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("achilles_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

} // namespace

TEST(TradingMinutes, SkipsWeekends) {
  auto fri = Timestamp::parse("2024-09-06 23:58");
  auto mon = Timestamp::parse("2024-09-09 00:02");
  auto m = trading_minutes(fri, mon);
  ASSERT_EQ(m.size(), 4u);
  EXPECT_EQ(m[1].to_string(), "2024-09-06 23:59:00");
  EXPECT_EQ(m[2].to_string(), "2024-09-09 00:00:00");
  EXPECT_TRUE(trading_minutes(Timestamp::parse("2024-09-07"), Timestamp::parse("2024-09-09")).empty());
  EXPECT_EQ(trading_minutes(Timestamp::parse("2024-09-02"), Timestamp::parse("2024-09-07")).size(), 5u * 1440);
}

TEST(BacktestConfigTest, BareEndDateIsInclusive) {
  nlohmann::json j = {{"start", "2024-09-02"}, {"end", "2024-09-06"}, {"bars", "bars.csv"}};
  auto c = BacktestConfig::from_json(j, "/data");
  EXPECT_EQ(c.end.to_string(), "2024-09-07 00:00:00");
  EXPECT_EQ(c.bars_path, fs::path("/data/bars.csv"));
  EXPECT_EQ(c.initial_balance, 1000.0);
  auto back = BacktestConfig::from_json(c.to_json());
  EXPECT_EQ(back.end, c.end);
  j["end"] = "2024-09-06 12:00";
  EXPECT_EQ(BacktestConfig::from_json(j).end.to_string(), "2024-09-06 12:00:00");
  j["prediction_mode"] = "psychic";
  EXPECT_THROW(BacktestConfig::from_json(j), Error);
  j["prediction_mode"] = "frame";
  j["end"] = "2024-09-01";
  EXPECT_THROW(BacktestConfig::from_json(j), Error);
}

TEST(DailyPnl, GroupsCloseEventsByDay) {
  std::vector<TradeEvent> t{
      {Timestamp::parse("2024-09-02 10:00"), TradeEventKind::Open, 1, Side::Buy, 0.1, 1, 0, 1000},
      {Timestamp::parse("2024-09-02 11:00"), TradeEventKind::Close, 1, Side::Buy, 0.1, 1, 5.5, 1005.5},
      {Timestamp::parse("2024-09-02 23:59"), TradeEventKind::Close, 2, Side::Buy, 0.1, 1, -1.0, 1004.5},
      {Timestamp::parse("2024-09-04 00:00"), TradeEventKind::Close, 3, Side::Buy, 0.1, 1, 2.0, 1006.5}};
  auto d = daily_pnl_from_trades(t);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].date, "2024-09-02");
  EXPECT_DOUBLE_EQ(d[0].pnl, 4.5);
  EXPECT_EQ(d[1].date, "2024-09-04");
  std::ostringstream out;
  write_daily_pnl(out, d);
  EXPECT_EQ(out.str(), "Date,Profit\n2024-09-02,4.50\n2024-09-04,2.00\nTOTAL,6.50\n");
  auto svg = waterfall_svg(d);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("2024-09-04"), std::string::npos);
}

TEST(Backtest, CoverageIsCheckedUpFront) {
  const Timestamp start = Timestamp::from_civil(2024, 9, 2);
  auto market = oracle::sine_market(start, 600);
  BacktestConfig cfg;
  cfg.start = start;
  cfg.end = start.plus_minutes(700);
  oracle::ConstantSentiment sentiment(0.9, SentimentLabel::Positive, start);
  StaticFrameSource source(market.frame);
  try {
    run_backtest(cfg, market.real, source, sentiment);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Coverage);
  }
  cfg.end = start.plus_minutes(500);
  PredictionFrame partial = market.frame;
  partial.entries.resize(300);
  StaticFrameSource short_source(partial);
  EXPECT_THROW(run_backtest(cfg, market.real, short_source, sentiment), Error);
}

TEST(Backtest, AccountingAndDeterminism) {
  const Timestamp start = Timestamp::from_civil(2024, 9, 2);
  auto market = oracle::sine_market(start, 1000);
  BacktestConfig cfg;
  cfg.start = start;
  cfg.end = start.plus_minutes(900);
  oracle::ConstantSentiment sentiment(0.9, SentimentLabel::Positive, start);
  StaticFrameSource a(market.frame), b(market.frame);
  auto r1 = run_backtest(cfg, market.real, a, sentiment);
  auto r2 = run_backtest(cfg, market.real, b, sentiment);
  EXPECT_EQ(r1.trades, r2.trades);
  EXPECT_EQ(r1.final_balance, r2.final_balance);
  EXPECT_EQ(r1.steps, 900u);
  EXPECT_EQ(r1.sentiment_refreshes, 60u);
  double realized = 0.0;
  for (const auto& e : r1.trades) realized += e.realized_pnl;
  EXPECT_NEAR(r1.final_balance, cfg.initial_balance + realized, 1e-9);
  double daily = 0.0;
  for (const auto& d : r1.daily) daily += d.pnl;
  EXPECT_NEAR(daily, r1.total_pnl(), 1e-9);
  EXPECT_GT(r1.round_trips, 0u);
  EXPECT_EQ(r1.equity.size(), 900u);
  EXPECT_EQ(r1.equity.back().balance, r1.final_balance);
  auto replayed = replay_trade_log(r1.trades, cfg.initial_balance);
  EXPECT_TRUE(replayed.open_orders().empty());
}

TEST(Backtest, ColdStartNeverTrades) {
  const Timestamp start = Timestamp::from_civil(2024, 9, 2);
  auto market = oracle::sine_market(start, 200);
  BacktestConfig cfg;
  cfg.start = start;
  cfg.end = start.plus_minutes(100);
  oracle::ConstantSentiment late(0.9, SentimentLabel::Positive, start.plus_minutes(5000));
  StaticFrameSource source(market.frame);
  auto r = run_backtest(cfg, market.real, source, late);
  EXPECT_TRUE(r.trades.empty());
  EXPECT_EQ(r.final_balance, 1000.0);
}

TEST(Backtest, FilesEndToEnd) {
  auto dir = scratch("files");
  const Timestamp start = Timestamp::from_civil(2024, 9, 2);
  auto market = oracle::sine_market(start, 400);
  {
    std::ofstream bars(dir / "bars.csv");
    write_bars(bars, market.real);
    std::ofstream preds(dir / "predictions.csv");
    write_predictions(preds, market.frame);
    std::ofstream feed(dir / "sentiment.csv");
    std::vector<SourceReading> r{{"ft.com", start, 0.95, SentimentLabel::Positive}};
    write_sentiment_feed(feed, r);
  }
  nlohmann::json j = {{"start", "2024-09-02 00:00"},
                      {"end", "2024-09-02 05:00"},
                      {"bars", "bars.csv"},
                      {"prediction_mode", "frame"},
                      {"predictions", "predictions.csv"},
                      {"sentiment", "sentiment.csv"}};
  auto cfg = BacktestConfig::from_json(j, dir);
  auto report = run_backtest(cfg);
  EXPECT_EQ(report.steps, 300u);
  auto out = dir / "run";
  emit_report(report, out);
  for (const char* f : {"trades.csv", "daily_pnl.csv", "equity.csv", "summary.json", "waterfall.svg",
                        "decisions.jsonl"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  std::ifstream trades(out / "trades.csv");
  EXPECT_EQ(read_trade_log(trades), report.trades);
  std::ifstream summary(out / "summary.json");
  auto s = nlohmann::json::parse(summary);
  EXPECT_DOUBLE_EQ(s["final_balance"].get<double>(), report.final_balance);

  cfg.sentiment_path = dir / "missing.csv";
  try {
    run_backtest(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Emit, DailyTotalAndStableBytes) {
  BacktestReport r;
  r.initial_balance = 1000.0;
  r.daily = {{"2024-09-02", 19.27}, {"2024-09-03", 66.31}};
  r.final_balance = 1085.58;
  std::ostringstream daily;
  write_daily_pnl(daily, r.daily);
  EXPECT_EQ(daily.str(), "Date,Profit\n2024-09-02,19.27\n2024-09-03,66.31\nTOTAL,85.58\n");

  auto a = scratch("emit_a"), b = scratch("emit_b");
  emit_report(r, a);
  emit_report(r, b);
  for (const char* f : {"trades.csv", "daily_pnl.csv", "equity.csv", "summary.json", "waterfall.svg"}) {
    std::ifstream fa(a / f), fb(b / f);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << f;
  }
}

TEST(Emit, NoTradesGivesZeroTotal) {
  std::ostringstream daily;
  write_daily_pnl(daily, {});
  EXPECT_EQ(daily.str(), "Date,Profit\nTOTAL,0.00\n");
  EXPECT_NE(waterfall_svg({}).find("<svg"), std::string::npos);
}
