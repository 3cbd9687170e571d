// Thin Python surface over the core library. JSON crosses the boundary as
// strings so the bindings stay free of a converter layer.

#include "achilles/digest.hpp"
#include "achilles/error.hpp"
#include "achilles/harness.hpp"
#include "achilles/marketdata.hpp"
#include "achilles/model.hpp"
#include "achilles/paperbroker.hpp"
#include "achilles/sentiment.hpp"

#include <fstream>
#include <fmt/format.h>
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace achilles;

namespace {

BarSeries load_file(const std::string& path, int minutes) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return load_bars(in, Timeframe(minutes));
}

IndicatorParams params_for(int rsi_period, int ema_length, bool paper) {
  IndicatorParams p;
  p.rsi_period = rsi_period;
  p.ema_length = ema_length;
  p.ema_variant = paper ? EmaVariant::Paper : EmaVariant::Standard;
  p.validate();
  return p;
}

} // namespace

PYBIND11_MODULE(_achilles, m) {
  m.doc() = "Minute-bar forecasting, sentiment gating and paper-trading backtests";

  static py::exception<Error> error(m, "AchillesError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, fmt::format("{}: {}", to_string(e.kind()), e.what()).c_str());
    }
  });

  py::class_<BarSeries>(m, "BarSeries")
      .def("__len__", &BarSeries::size)
      .def("closes", &BarSeries::closes)
      .def_property_readonly("times", [](const BarSeries& s) {
        std::vector<std::string> out;
        for (const auto& b : s.bars) out.push_back(b.time.to_string());
        return out;
      })
      .def_readonly("rsi", &BarSeries::rsi)
      .def_readonly("ema", &BarSeries::ema);

  m.def("load_bars", &load_file, py::arg("path"), py::arg("timeframe_minutes") = 1);
  m.def(
      "enrich",
      [](const BarSeries& s, int rsi_period, int ema_length, bool paper_ema) {
        return enrich(s, params_for(rsi_period, ema_length, paper_ema));
      },
      py::arg("series"), py::arg("rsi_period") = 14, py::arg("ema_length") = 14, py::arg("paper_ema") = true);
  m.def(
      "smma", [](const std::vector<double>& v, int n) { return smma(v, n); }, py::arg("values"), py::arg("n"));
  m.def("rsi_from_averages", &rsi_from_averages);

  m.def(
      "parameter_count",
      [](std::size_t features, std::size_t units1, std::size_t units2, std::size_t lookback) {
        return ModelConfig{features, units1, units2, lookback}.parameter_count();
      },
      py::arg("features") = 7, py::arg("lstm1_units") = 35, py::arg("lstm2_units") = 20,
      py::arg("lookback") = 120);
  m.def(
      "forward",
      [](const std::string& model_path, const std::vector<double>& window) {
        std::ifstream in(model_path, std::ios::binary);
        if (!in) throw Error(ErrorKind::Io, "cannot open '" + model_path + "'");
        return forward(load_params(in), window);
      },
      py::arg("model_path"), py::arg("window"));

  m.def(
      "position_size",
      [](double balance, double risk, double price) {
        return position_size(SizingInputs{balance, risk, price});
      },
      py::arg("balance"), py::arg("risk"), py::arg("price"));

  m.def(
      "sentiment_at",
      [](const std::string& feed_path, const std::string& time) {
        std::ifstream in(feed_path);
        if (!in) throw Error(ErrorKind::Io, "cannot open '" + feed_path + "'");
        auto provider = FileSentimentProvider::load(in);
        auto snap = snapshot_at(provider, Timestamp::parse(time));
        py::dict d;
        d["avg_probability"] = snap.avg_probability;
        d["avg_sentiment"] = snap.avg_sentiment;
        d["cold_start"] = snap.cold_start;
        d["sources"] = snap.readings.size();
        return d;
      },
      py::arg("feed_path"), py::arg("time"));

  m.def(
      "run_backtest",
      [](const std::string& config_json, const std::string& base_dir, const std::string& out_dir) {
        auto cfg = BacktestConfig::from_json(nlohmann::json::parse(config_json), base_dir);
        BacktestReport report;
        {
          py::gil_scoped_release release;
          report = run_backtest(cfg);
          if (!out_dir.empty()) emit_report(report, out_dir);
        }
        return report.summary().dump();
      },
      py::arg("config_json"), py::arg("base_dir") = ".", py::arg("out_dir") = "");

  m.def("sha256_hex", [](const std::string& data) { return sha256_hex(data); });
}
