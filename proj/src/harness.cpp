#include "achilles/harness.hpp"

#include "achilles/csv.hpp"
#include "achilles/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <fmt/format.h>

namespace achilles {

namespace {

std::string mode_name(PredictionMode m) { return m == PredictionMode::Frame ? "frame" : "refresh"; }

std::ifstream open_input(const std::filesystem::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open {} '{}'", what, path.string()));
  return in;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(ErrorKind::Io, fmt::format("failed writing '{}'", path.string()));
}

} // namespace

void BacktestConfig::validate() const {
  if (!(end > start)) throw Error(ErrorKind::InvalidArgument, "backtest range is empty");
  if (!(initial_balance > 0.0)) throw Error(ErrorKind::InvalidArgument, "initial balance must be positive");
  bot.validate();
  broker.validate();
}

nlohmann::json BacktestConfig::to_json() const {
  return {{"training_symbol", training_symbol},
          {"trading_symbol", trading_symbol},
          {"start", start.to_string()},
          {"end", end.to_string()},
          {"initial_balance", initial_balance},
          {"bot", bot.to_json()},
          {"broker",
           {{"contract_multiplier", broker.contract_multiplier},
            {"volume_step", broker.volume_step},
            {"min_volume", broker.min_volume},
            {"max_open_orders", broker.max_open_orders},
            {"fee_per_order", broker.fee_per_order}}},
          {"prediction_mode", mode_name(prediction_mode)},
          {"force_close_at_end", force_close_at_end},
          {"bars", bars_path.string()},
          {"predictions", predictions_path.string()},
          {"model", model_path.string()},
          {"pipeline", pipeline_path.string()},
          {"sentiment", sentiment_path.string()},
          {"headlines", headlines_path.string()}};
}

BacktestConfig BacktestConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  BacktestConfig c;
  c.training_symbol = j.value("training_symbol", c.training_symbol);
  c.trading_symbol = j.value("trading_symbol", c.trading_symbol);
  c.start = Timestamp::parse(j.at("start").get<std::string>());
  auto end_text = j.at("end").get<std::string>();
  c.end = Timestamp::parse(end_text);
  if (end_text.find(' ') == std::string::npos && end_text.find('T') == std::string::npos) {
    c.end = c.end.plus_minutes(24 * 60);
  }
  c.initial_balance = j.value("initial_balance", c.initial_balance);
  if (j.contains("bot")) c.bot = BotConfig::from_json(j.at("bot"));
  if (j.contains("broker")) {
    const auto& b = j.at("broker");
    c.broker.contract_multiplier = b.value("contract_multiplier", c.broker.contract_multiplier);
    c.broker.volume_step = b.value("volume_step", c.broker.volume_step);
    c.broker.min_volume = b.value("min_volume", c.broker.min_volume);
    c.broker.max_open_orders = b.value("max_open_orders", c.broker.max_open_orders);
    c.broker.fee_per_order = b.value("fee_per_order", c.broker.fee_per_order);
  }
  auto mode = j.value("prediction_mode", std::string("refresh"));
  if (mode == "frame") {
    c.prediction_mode = PredictionMode::Frame;
  } else if (mode == "refresh") {
    c.prediction_mode = PredictionMode::Refresh;
  } else {
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown prediction_mode '{}'", mode));
  }
  c.force_close_at_end = j.value("force_close_at_end", c.force_close_at_end);
  auto path = [&](const char* key) -> std::filesystem::path {
    auto text = j.value(key, std::string());
    if (text.empty()) return {};
    std::filesystem::path p(text);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  c.bars_path = path("bars");
  c.predictions_path = path("predictions");
  c.model_path = path("model");
  c.pipeline_path = path("pipeline");
  c.sentiment_path = path("sentiment");
  c.headlines_path = path("headlines");
  c.validate();
  return c;
}

nlohmann::json BacktestReport::summary() const {
  nlohmann::json days = nlohmann::json::array();
  for (const auto& d : daily) days.push_back({{"date", d.date}, {"pnl", d.pnl}});
  nlohmann::json j = {{"initial_balance", initial_balance},
                      {"final_balance", final_balance},
                      {"total_pnl", total_pnl()},
                      {"round_trips", round_trips},
                      {"trade_events", trades.size()},
                      {"steps", steps},
                      {"sentiment_refreshes", sentiment_refreshes},
                      {"force_closed", force_closed},
                      {"rejected_orders", rejected_orders},
                      {"daily_pnl", days},
                      {"warnings", warnings}};
  if (metrics) {
    j["metrics"] = {{"mse", metrics->mse}, {"mae", metrics->mae}, {"mape", metrics->mape},
                    {"count", metrics->count}};
  }
  return j;
}

std::optional<Timestamp> PredictionSource::first_uncovered(const std::vector<Timestamp>&) const {
  return std::nullopt;
}

std::optional<Timestamp> StaticFrameSource::first_uncovered(const std::vector<Timestamp>& minutes) const {
  for (auto m : minutes) {
    if (!frame_.index_of(m)) return m;
  }
  return std::nullopt;
}

std::vector<Timestamp> trading_minutes(Timestamp start, Timestamp end) {
  std::vector<Timestamp> out;
  for (Timestamp t = start.floor_minute(); t < end; t = t.plus_minutes(1)) {
    if (t < start) continue;
    if (t.is_weekend()) {
      t = t.start_of_day().plus_minutes(24 * 60 - 1);
      continue;
    }
    out.push_back(t);
  }
  return out;
}

std::vector<DailyPnl> daily_pnl_from_trades(const std::vector<TradeEvent>& trades) {
  std::map<std::int64_t, double> by_day;
  for (const auto& e : trades) {
    if (e.kind == TradeEventKind::Close) by_day[e.time.day_index()] += e.realized_pnl;
  }
  std::vector<DailyPnl> out;
  for (auto [day, pnl] : by_day) out.push_back({Timestamp{day * Timestamp::kDay}.date_string(), pnl});
  return out;
}

BacktestReport run_backtest(const BacktestConfig& config, const BarSeries& real,
                            PredictionSource& predictions, const SentimentProvider& sentiment) {
  config.validate();
  BacktestReport report;
  report.initial_balance = report.final_balance = config.initial_balance;
  const auto minutes = trading_minutes(config.start, config.end);
  if (minutes.empty()) return report;

  if (real.bars.empty() || real.bars.front().time > minutes.front()) {
    throw Error(ErrorKind::Coverage,
                fmt::format("real bars do not cover {}", minutes.front().to_string()));
  }
  if (real.bars.back().time < minutes.back()) {
    auto it = std::upper_bound(minutes.begin(), minutes.end(), real.bars.back().time);
    throw Error(ErrorKind::Coverage, fmt::format("real bars do not cover {}", it->to_string()));
  }
  if (auto gap = predictions.first_uncovered(minutes)) {
    throw Error(ErrorKind::Coverage, fmt::format("predictions do not cover {}", gap->to_string()));
  }

  BotState state{Account(config.initial_balance, config.broker), cold_start_snapshot(minutes.front()),
                 std::nullopt, std::nullopt, 0};
  report.equity.reserve(minutes.size());
  double last_price = real.bars.front().close;
  for (auto now : minutes) {
    PredictionFrame frame = predictions.frame_at(real, now);
    auto outcome = step(state, now, frame, real, sentiment, config.bot);
    ++report.steps;
    if (outcome.log.contains("price")) last_price = outcome.log["price"].get<double>();
    report.rejected_orders += outcome.rejected;
    report.trades.insert(report.trades.end(), outcome.events.begin(), outcome.events.end());
    report.decisions.push_back(std::move(outcome.log));
    report.equity.push_back({now, state.account.balance(), state.account.equity(last_price)});
  }
  report.sentiment_refreshes = state.refresh_count;

  if (!state.account.open_orders().empty()) {
    if (config.force_close_at_end) {
      std::vector<OrderId> ids;
      for (const auto& o : state.account.open_orders()) ids.push_back(o.id);
      for (auto id : ids) report.trades.push_back(state.account.close_order(id, last_price, minutes.back()));
      report.force_closed = ids.size();
      report.warnings.push_back(fmt::format("force-closed {} open orders at {} price {}", ids.size(),
                                            minutes.back().to_string(), csv::exact(last_price)));
      report.equity.back().balance = state.account.balance();
      report.equity.back().equity = state.account.equity(last_price);
    } else {
      report.warnings.push_back(
          fmt::format("{} orders still open at the end of the range", state.account.open_orders().size()));
    }
  }
  report.final_balance = state.account.balance();
  report.round_trips = state.account.closed_orders().size();
  report.daily = daily_pnl_from_trades(report.trades);
  return report;
}

BacktestReport run_backtest(const BacktestConfig& config) {
  config.validate();
  auto bars_in = open_input(config.bars_path, "bar file");
  BarSeries real = load_bars(bars_in, Timeframe(1));

  std::unique_ptr<SentimentProvider> sentiment;
  if (!config.sentiment_path.empty()) {
    auto in = open_input(config.sentiment_path, "sentiment feed");
    sentiment = std::make_unique<FileSentimentProvider>(FileSentimentProvider::load(in));
  } else if (!config.headlines_path.empty()) {
    auto in = open_input(config.headlines_path, "headline feed");
    sentiment = std::make_unique<LexiconSentimentProvider>(LexiconSentimentProvider::load(in));
  } else {
    throw Error(ErrorKind::InvalidArgument, "backtest config names no sentiment feed");
  }

  if (config.prediction_mode == PredictionMode::Frame) {
    if (config.predictions_path.empty()) throw Error(ErrorKind::InvalidArgument, "frame mode needs 'predictions'");
    auto in = open_input(config.predictions_path, "prediction file");
    StaticFrameSource source(read_predictions(in));
    return run_backtest(config, real, source, *sentiment);
  }
  if (config.model_path.empty() || config.pipeline_path.empty()) {
    throw Error(ErrorKind::InvalidArgument, "refresh mode needs 'model' and 'pipeline'");
  }
  auto model_in = open_input(config.model_path, "model file");
  LstmPredictor model(load_params(model_in));
  auto pipe_in = open_input(config.pipeline_path, "pipeline file");
  FeaturePipeline pipeline = pipeline_from_json(nlohmann::json::parse(pipe_in));
  if (model.params().config().input_features != pipeline.spec.feature_count() ||
      model.params().config().lookback != pipeline.spec.lookback) {
    throw Error(ErrorKind::ShapeMismatch, "model shape does not match the feature pipeline");
  }
  real = enrich(std::move(real), pipeline.indicators);
  RefreshFrameSource source(RefreshForecaster(model, pipeline, config.bot.slice_back, config.bot.slice_fwd));
  return run_backtest(config, real, source, *sentiment);
}

void write_daily_pnl(std::ostream& sink, const std::vector<DailyPnl>& daily) {
  sink << "Date,Profit\n";
  double total = 0.0;
  for (const auto& d : daily) {
    sink << d.date << ',' << fmt::format("{:.2f}", d.pnl) << '\n';
    total += d.pnl;
  }
  sink << "TOTAL," << fmt::format("{:.2f}", total + 0.0) << '\n';
}

std::string waterfall_svg(const std::vector<DailyPnl>& daily) {
  constexpr double width = 60.0, gap = 20.0, height = 300.0, margin = 40.0;
  std::vector<double> levels{0.0};
  for (const auto& d : daily) levels.push_back(levels.back() + d.pnl);
  auto [lo_it, hi_it] = std::minmax_element(levels.begin(), levels.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi - lo < 1e-9) hi = lo + 1.0;
  auto y = [&](double v) { return margin + (hi - v) / (hi - lo) * height; };
  const std::size_t bars = daily.size() + 1;
  const double total_w = 2 * margin + static_cast<double>(bars) * (width + gap);
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\">\n", total_w,
      height + 2 * margin + 30);
  svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.2f}\" x2=\"{:.1f}\" y2=\"{:.2f}\" stroke=\"#888\"/>\n",
                     margin, y(0.0), total_w - margin, y(0.0));
  auto rect = [&](std::size_t i, double from, double to, const char* color, const std::string& label) {
    double x = margin + static_cast<double>(i) * (width + gap);
    double top = y(std::max(from, to));
    double h = std::max(std::abs(y(from) - y(to)), 1.0);
    svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.2f}\" width=\"{:.1f}\" height=\"{:.2f}\" fill=\"{}\"/>\n", x,
                       top, width, h, color);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                       x + width / 2, height + 2 * margin + 10, label);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.2f}\" font-size=\"10\" text-anchor=\"middle\">{:.2f}</text>\n",
                       x + width / 2, top - 4, to - from);
  };
  for (std::size_t i = 0; i < daily.size(); ++i) {
    rect(i, levels[i], levels[i + 1], daily[i].pnl >= 0 ? "#2e8b57" : "#c0392b", daily[i].date);
  }
  rect(daily.size(), 0.0, levels.back(), "#34495e", "TOTAL");
  svg += "</svg>\n";
  return svg;
}

void emit_report(const BacktestReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream s;
    write_trade_log(s, report.trades);
    write_file(dir / "trades.csv", s.str());
  }
  {
    std::ostringstream s;
    write_daily_pnl(s, report.daily);
    write_file(dir / "daily_pnl.csv", s.str());
  }
  {
    std::ostringstream s;
    s << "time,balance,equity\n";
    for (const auto& p : report.equity) {
      s << p.time.to_string() << ',' << csv::exact(p.balance) << ',' << csv::exact(p.equity) << '\n';
    }
    write_file(dir / "equity.csv", s.str());
  }
  {
    std::string lines;
    for (const auto& d : report.decisions) lines += d.dump() + '\n';
    write_file(dir / "decisions.jsonl", lines);
  }
  write_file(dir / "summary.json", report.summary().dump(2) + '\n');
  write_file(dir / "waterfall.svg", waterfall_svg(report.daily));
}

} // namespace achilles
