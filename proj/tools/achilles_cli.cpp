// Command-line front end: ingest, train, rollout, backtest, report.
// Every subcommand writes into a run directory with a manifest.json that
// records the seed and the SHA-256 of each input it read.

#include "achilles/dataset.hpp"
#include "achilles/digest.hpp"
#include "achilles/error.hpp"
#include "achilles/forecaster.hpp"
#include "achilles/harness.hpp"
#include "achilles/marketdata.hpp"
#include "achilles/model.hpp"
#include "achilles/paperbroker.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <algorithm>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace achilles;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Run {
  std::string command;
  fs::path config_path;
  fs::path base_dir;
  json config;
  fs::path out;
  std::uint64_t seed = 0;
  std::vector<fs::path> inputs;
  std::vector<std::string> outputs;
};

fs::path resolve(const Run& run, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : run.base_dir / path;
}

std::ifstream open_in(Run& run, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  run.inputs.push_back(path);
  return in;
}

void write_out(Run& run, const std::string& name, const std::string& data) {
  std::ofstream out(run.out / name, std::ios::binary);
  out << data;
  if (!out) throw Error(ErrorKind::Io, fmt::format("failed writing '{}'", (run.out / name).string()));
  run.outputs.push_back(name);
}

void load_config(Run& run, const std::string& config, std::optional<std::uint64_t> seed) {
  run.config_path = fs::absolute(config);
  run.base_dir = run.config_path.parent_path();
  std::ifstream in(run.config_path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open config '{}'", config));
  try {
    run.config = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadInput, fmt::format("config is not valid JSON: {}", e.what()));
  }
  run.seed = seed ? *seed : run.config.value("seed", std::uint64_t{0});
  fs::create_directories(run.out);
}

void write_manifest(const Run& run, const json& extra = json::object()) {
  json inputs = json::array();
  for (const auto& p : run.inputs) inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  json m = {{"tool", "achilles"},
            {"version", kVersion},
            {"command", run.command},
            {"seed", run.seed},
            {"config", {{"path", run.config_path.string()}, {"sha256", sha256_file(run.config_path)}}},
            {"inputs", inputs},
            {"outputs", run.outputs}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream out(run.out / "manifest.json");
  out << m.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing manifest.json");
}

const json& section(const Run& run, const char* name) {
  if (!run.config.contains(name)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("config has no '{}' section", name));
  }
  return run.config.at(name);
}

IndicatorParams indicators_from(const json& j) {
  IndicatorParams p;
  p.rsi_period = j.value("rsi_period", p.rsi_period);
  p.ema_length = j.value("ema_length", p.ema_length);
  auto variant = j.value("ema_variant", std::string("paper"));
  if (variant != "paper" && variant != "standard") {
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown ema_variant '{}'", variant));
  }
  p.ema_variant = variant == "paper" ? EmaVariant::Paper : EmaVariant::Standard;
  p.validate();
  return p;
}

struct Dataset {
  std::vector<BarSeries> series;
  std::vector<LoadStats> stats;
  FeaturePipeline pipeline;
  SampleSet all;
  SampleSet train;
  SampleSet test;
};

Dataset build_dataset(Run& run) {
  const json& data = section(run, "data");
  Dataset d;
  d.pipeline.indicators = indicators_from(data.value("indicators", json::object()));
  const json& window = data.value("window", json::object());
  d.pipeline.spec.lookback = window.value("lookback", d.pipeline.spec.lookback);
  if (window.contains("columns")) {
    d.pipeline.spec.columns.clear();
    for (const auto& c : window.at("columns")) d.pipeline.spec.columns.push_back(column_from_string(c.get<std::string>()));
  }
  if (window.contains("target")) d.pipeline.spec.target = column_from_string(window.at("target").get<std::string>());
  d.pipeline.spec.validate();

  LoadOptions opts;
  auto check = data.value("ohlc_check", std::string("count"));
  if (check != "count" && check != "reject") throw Error(ErrorKind::InvalidArgument, "ohlc_check must be count or reject");
  opts.ohlc = check == "count" ? OhlcCheck::Count : OhlcCheck::Reject;

  if (!data.contains("bars") || data.at("bars").empty()) throw Error(ErrorKind::InvalidArgument, "data.bars is empty");
  for (const auto& entry : data.at("bars")) {
    auto in = open_in(run, resolve(run, entry.at("path").get<std::string>()));
    LoadStats stats;
    auto s = load_bars(in, Timeframe(entry.value("timeframe_minutes", 1)), opts, &stats);
    d.series.push_back(enrich(std::move(s), d.pipeline.indicators));
    d.stats.push_back(stats);
  }
  d.pipeline.scaler = fit_scaler(d.series, d.pipeline.spec.columns);
  std::vector<SampleSet> sets;
  for (const auto& s : d.series) sets.push_back(make_windows(s, d.pipeline.spec, d.pipeline.scaler));
  d.all = merge(sets);
  if (d.all.empty()) throw Error(ErrorKind::InsufficientHistory, "no series is long enough for one window");
  std::tie(d.train, d.test) = split(d.all, data.value("train_ratio", 0.8));
  return d;
}

json dataset_summary(const Dataset& d) {
  json s = d.all.summary();
  s["train_samples"] = d.train.size();
  s["test_samples"] = d.test.size();
  json files = json::array();
  for (std::size_t i = 0; i < d.series.size(); ++i) {
    files.push_back({{"timeframe_minutes", d.series[i].timeframe.minutes()},
                     {"rows", d.stats[i].rows},
                     {"ohlc_violations", d.stats[i].ohlc_violations}});
  }
  s["series"] = files;
  return s;
}

int cmd_ingest(Run& run) {
  auto d = build_dataset(run);
  for (std::size_t i = 0; i < d.series.size(); ++i) {
    std::ostringstream s;
    write_bars(s, d.series[i]);
    write_out(run, fmt::format("bars_{}_{}m.csv", i, d.series[i].timeframe.minutes()), s.str());
  }
  write_out(run, "pipeline.json", to_json(d.pipeline).dump(2) + '\n');
  auto summary = dataset_summary(d);
  write_out(run, "dataset.json", summary.dump(2) + '\n');
  write_manifest(run);
  std::cout << summary.dump() << '\n';
  return 0;
}

TrainConfig train_config_from(const json& j, std::uint64_t seed) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.gradient_clip_norm = j.value("gradient_clip_norm", c.gradient_clip_norm);
  c.shuffle = j.value("shuffle", c.shuffle);
  auto opt = j.value("optimizer", std::string("sgd"));
  if (opt != "sgd" && opt != "adam") throw Error(ErrorKind::InvalidArgument, fmt::format("unknown optimizer '{}'", opt));
  c.optimizer = opt == "sgd" ? Optimizer::Sgd : Optimizer::Adam;
  if (j.contains("stop_below_mse") && !j.at("stop_below_mse").is_null()) c.stop_below_mse = j.at("stop_below_mse").get<double>();
  c.seed = seed;
  c.validate();
  return c;
}

int cmd_train(Run& run) {
  auto d = build_dataset(run);
  const json model_j = run.config.value("model", json::object());
  ModelConfig mc;
  mc.input_features = d.pipeline.spec.feature_count();
  mc.lookback = d.pipeline.spec.lookback;
  mc.lstm1_units = model_j.value("lstm1_units", mc.lstm1_units);
  mc.lstm2_units = model_j.value("lstm2_units", mc.lstm2_units);
  auto tc = train_config_from(run.config.value("train", json::object()), run.seed);

  auto result = train(init_params(mc, run.seed), d.train, d.test, tc);
  {
    std::ostringstream s;
    save_params(result.params, s);
    write_out(run, "model.bin", s.str());
  }
  write_out(run, "pipeline.json", to_json(d.pipeline).dump(2) + '\n');
  std::string history = "epoch,train_mse,val_mse\n";
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    const auto& h = result.history[e];
    history += fmt::format("{},{},{}\n", e + 1, h.train_mse, h.val_mse ? fmt::format("{}", *h.val_mse) : "");
  }
  write_out(run, "loss_history.csv", history);

  json metrics = {{"parameter_count", mc.parameter_count()},
                  {"epochs_run", result.history.size()},
                  {"diverged", result.diverged},
                  {"train_mse", result.diverged ? json(nullptr) : json(dataset_mse(result.params, d.train))}};
  if (!d.test.empty() && !result.diverged) {
    auto m = evaluate(LstmPredictor(result.params), d.test);
    metrics["test"] = {{"mse", m.mse}, {"mae", m.mae}, {"mape", m.mape}, {"count", m.count}};
  }
  metrics["dataset"] = dataset_summary(d);
  write_out(run, "metrics.json", metrics.dump(2) + '\n');
  write_manifest(run, {{"train", {{"learning_rate", tc.learning_rate},
                                  {"epochs", tc.epochs},
                                  {"batch_size", tc.batch_size},
                                  {"optimizer", tc.optimizer == Optimizer::Sgd ? "sgd" : "adam"}}}});
  std::cout << metrics.dump() << '\n';
  if (result.diverged) throw Error(ErrorKind::NonFinite, "training diverged; partial history written");
  return 0;
}

int cmd_rollout(Run& run) {
  const json& r = section(run, "rollout");
  auto model_in = open_in(run, resolve(run, r.at("model").get<std::string>()));
  LstmPredictor model(load_params(model_in));
  auto pipe_in = open_in(run, resolve(run, r.at("pipeline").get<std::string>()));
  auto pipeline = pipeline_from_json(json::parse(pipe_in));
  auto bars_in = open_in(run, resolve(run, r.at("seed_bars").get<std::string>()));
  auto seed = enrich(load_bars(bars_in, Timeframe(r.value("timeframe_minutes", 1))), pipeline.indicators);
  if (r.contains("seed_end")) {
    // Keep only bars strictly before seed_end.
    auto cut = Timestamp::parse(r.at("seed_end").get<std::string>());
    std::size_t n = 0;
    while (n < seed.size() && seed.bars[n].time < cut) ++n;
    seed.bars.resize(n);
    seed.rsi.resize(n);
    seed.ema.resize(n);
  }
  RolloutConfig rc{r.at("horizon").get<std::size_t>(), r.value("synthetic_volume_window", std::size_t{20})};
  std::optional<Timestamp> start;
  if (r.contains("start")) start = Timestamp::parse(r.at("start").get<std::string>());
  auto frame = rollout(model, seed, pipeline, rc, start);
  std::ostringstream s;
  write_predictions(s, frame);
  write_out(run, "predictions.csv", s.str());
  json info = {{"entries", frame.size()}, {"truncated", frame.truncated}, {"truncation_reason", frame.truncation_reason}};
  if (!frame.empty()) {
    info["first"] = frame.entries.front().time.to_string();
    info["last"] = frame.entries.back().time.to_string();
  }
  write_out(run, "rollout.json", info.dump(2) + '\n');
  write_manifest(run);
  std::cout << info.dump() << '\n';
  return 0;
}

int cmd_backtest(Run& run) {
  auto cfg = BacktestConfig::from_json(section(run, "backtest"), run.base_dir);
  for (const auto* p : {&cfg.bars_path, &cfg.predictions_path, &cfg.model_path, &cfg.pipeline_path,
                        &cfg.sentiment_path, &cfg.headlines_path}) {
    if (!p->empty() && fs::exists(*p)) run.inputs.push_back(*p);
  }
  if (cfg.prediction_mode == PredictionMode::Frame) {
    run.inputs.erase(std::remove(run.inputs.begin(), run.inputs.end(), cfg.model_path), run.inputs.end());
  }
  auto report = run_backtest(cfg);
  emit_report(report, run.out);
  for (const char* f : {"trades.csv", "daily_pnl.csv", "equity.csv", "decisions.jsonl", "summary.json", "waterfall.svg"})
    run.outputs.push_back(f);
  write_manifest(run, {{"backtest", cfg.to_json()}});
  std::cout << report.summary().dump() << '\n';
  return 0;
}

/// Rebuilds the daily table and chart from a run's trade log and checks that
/// replaying the log reproduces the recorded balance.
int cmd_report(const fs::path& dir, const fs::path& out) {
  std::ifstream sum_in(dir / "summary.json");
  if (!sum_in) throw Error(ErrorKind::Io, fmt::format("no summary.json in '{}'", dir.string()));
  auto summary = json::parse(sum_in);
  std::ifstream trades_in(dir / "trades.csv");
  if (!trades_in) throw Error(ErrorKind::Io, fmt::format("no trades.csv in '{}'", dir.string()));
  auto trades = read_trade_log(trades_in);
  const double initial = summary.at("initial_balance").get<double>();
  BrokerConfig broker;
  fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream m(manifest_path);
    auto manifest = json::parse(m);
    if (manifest.contains("backtest")) {
      const auto& b = manifest["backtest"]["broker"];
      broker.contract_multiplier = b.value("contract_multiplier", broker.contract_multiplier);
      broker.volume_step = b.value("volume_step", broker.volume_step);
      broker.min_volume = b.value("min_volume", broker.min_volume);
      broker.fee_per_order = b.value("fee_per_order", broker.fee_per_order);
    }
  }
  auto account = replay_trade_log(trades, initial, broker);
  const double recorded = summary.at("final_balance").get<double>();
  if (account.balance() != recorded) {
    throw Error(ErrorKind::CorruptFeed, fmt::format("replayed balance {} differs from recorded {}",
                                                    account.balance(), recorded));
  }
  auto daily = daily_pnl_from_trades(trades);
  fs::create_directories(out);
  {
    std::ofstream f(out / "daily_pnl.csv");
    write_daily_pnl(f, daily);
    std::ofstream svg(out / "waterfall.svg");
    svg << waterfall_svg(daily);
    if (!f || !svg) throw Error(ErrorKind::Io, "failed writing report files");
  }
  double total = 0.0;
  for (const auto& d : daily) total += d.pnl;
  json result = {{"run", dir.string()},
                 {"days", daily.size()},
                 {"total_pnl", total},
                 {"final_balance", account.balance()},
                 {"open_orders", account.open_orders().size()},
                 {"reconciled", true}};
  std::cout << result.dump() << '\n';
  return 0;
}

void fail(std::string_view code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minute-bar LSTM forecasting, sentiment gating and paper-trading backtests"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string config, out_dir, run_dir;
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config document")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Run directory for outputs")->required();
    sub->add_option("--seed", seed, "Override the config's seed");
  };
  auto* ingest = app.add_subcommand("ingest", "Load bars, add indicators, build and split windows");
  auto* train_cmd = app.add_subcommand("train", "Train the forecaster and save model.bin");
  auto* rollout_cmd = app.add_subcommand("rollout", "Write a stacked prediction frame from a trained model");
  auto* backtest = app.add_subcommand("backtest", "Run the trading bot over a date range");
  for (auto* sub : {ingest, train_cmd, rollout_cmd, backtest}) add_common(sub);
  auto* report = app.add_subcommand("report", "Rebuild daily pnl and chart from a run's trade log");
  report->add_option("--run", run_dir, "Backtest run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", out_dir, "Where to write (defaults to the run directory)");

  if (argc > 1 && argv[1][0] != '-') {
    std::string name = argv[1];
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == name;
    if (!known) {
      std::cerr << app.help();
      fail("invalid_argument", fmt::format("unknown subcommand '{}'", name));
      return 2;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (report->parsed()) return cmd_report(run_dir, out_dir.empty() ? fs::path(run_dir) : fs::path(out_dir));
    Run run;
    run.out = out_dir;
    run.command = app.get_subcommands().front()->get_name();
    load_config(run, config, seed);
    if (ingest->parsed()) return cmd_ingest(run);
    if (train_cmd->parsed()) return cmd_train(run);
    if (rollout_cmd->parsed()) return cmd_rollout(run);
    return cmd_backtest(run);
  } catch (const Error& e) {
    fail(to_string(e.kind()), e.what());
  } catch (const json::exception& e) {
    fail("bad_config", e.what());
  } catch (const std::exception& e) {
    fail("internal", e.what());
  }
  return 1;
}
