#include "achilles/model.hpp"

#include "achilles/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace achilles {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Activations kept for the backward pass of one layer over one sequence.
struct LayerTrace {
  Mat gates;  ///< T x 4h: i, f, g, o after their nonlinearities
  Mat cells;  ///< T x h
  Mat tanh_c; ///< T x h
  Mat hidden; ///< T x h
};

struct LayerView {
  ConstMatMap w;
  ConstMatMap u;
  ConstVecMap b;
};

LayerView view(const ModelParams& p, std::size_t index) {
  auto o = p.layer(index);
  auto in = static_cast<Eigen::Index>(o.in);
  auto h = static_cast<Eigen::Index>(o.units);
  const double* base = p.values().data();
  return {ConstMatMap(base + o.input_weights, 4 * h, in),
          ConstMatMap(base + o.recurrent_weights, 4 * h, h), ConstVecMap(base + o.bias, 4 * h)};
}

void run_layer(const LayerView& layer, const Mat& input, LayerTrace& trace) {
  const Eigen::Index steps = input.rows();
  const Eigen::Index h = layer.u.cols();
  Mat pre = input * layer.w.transpose();
  pre.rowwise() += layer.b.transpose();
  trace.gates.resize(steps, 4 * h);
  trace.cells.resize(steps, h);
  trace.tanh_c.resize(steps, h);
  trace.hidden.resize(steps, h);
  Vec h_prev = Vec::Zero(h);
  Vec c_prev = Vec::Zero(h);
  Vec z(4 * h);
  for (Eigen::Index t = 0; t < steps; ++t) {
    z.noalias() = pre.row(t).transpose() + layer.u * h_prev;
    for (Eigen::Index k = 0; k < h; ++k) {
      double i = sigmoid(z[k]);
      double f = sigmoid(z[h + k]);
      double g = std::tanh(z[2 * h + k]);
      double o = sigmoid(z[3 * h + k]);
      double c = f * c_prev[k] + i * g;
      double tc = std::tanh(c);
      trace.gates(t, k) = i;
      trace.gates(t, h + k) = f;
      trace.gates(t, 2 * h + k) = g;
      trace.gates(t, 3 * h + k) = o;
      trace.cells(t, k) = c;
      trace.tanh_c(t, k) = tc;
      trace.hidden(t, k) = o * tc;
    }
    h_prev = trace.hidden.row(t).transpose();
    c_prev = trace.cells.row(t).transpose();
  }
}

/// Accumulates parameter gradients for one layer and returns dL/d(input).
Mat backprop_layer(const LayerView& layer, const Mat& input, const LayerTrace& trace,
                   const Mat& d_hidden, const ModelParams::LayerOffsets& off, double* grad) {
  const Eigen::Index steps = input.rows();
  const Eigen::Index h = layer.u.cols();
  Mat dz(steps, 4 * h);
  Vec dh_next = Vec::Zero(h);
  Vec dc_next = Vec::Zero(h);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    for (Eigen::Index k = 0; k < h; ++k) {
      double i = trace.gates(t, k);
      double f = trace.gates(t, h + k);
      double g = trace.gates(t, 2 * h + k);
      double o = trace.gates(t, 3 * h + k);
      double tc = trace.tanh_c(t, k);
      double c_prev = t > 0 ? trace.cells(t - 1, k) : 0.0;
      double dh = d_hidden(t, k) + dh_next[k];
      double dc = dh * o * (1.0 - tc * tc) + dc_next[k];
      dz(t, k) = dc * g * i * (1.0 - i);
      dz(t, h + k) = dc * c_prev * f * (1.0 - f);
      dz(t, 2 * h + k) = dc * i * (1.0 - g * g);
      dz(t, 3 * h + k) = dh * tc * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    dh_next.noalias() = layer.u.transpose() * dz.row(t).transpose();
  }
  const auto in = static_cast<Eigen::Index>(off.in);
  MatMap(grad + off.input_weights, 4 * h, in).noalias() += dz.transpose() * input;
  if (steps > 1) {
    MatMap(grad + off.recurrent_weights, 4 * h, h).noalias() +=
        dz.bottomRows(steps - 1).transpose() * trace.hidden.topRows(steps - 1);
  }
  VecMap(grad + off.bias, 4 * h) += dz.colwise().sum().transpose();
  return dz * layer.w;
}

Mat window_matrix(const ModelParams& params, std::span<const double> window) {
  const auto& cfg = params.config();
  if (window.size() != cfg.lookback * cfg.input_features) {
    throw Error(ErrorKind::ShapeMismatch,
                fmt::format("window has {} values, model expects {} x {}", window.size(),
                            cfg.lookback, cfg.input_features));
  }
  for (double v : window) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "non-finite value in model input");
  }
  return ConstMatMap(window.data(), static_cast<Eigen::Index>(cfg.lookback),
                     static_cast<Eigen::Index>(cfg.input_features));
}

double uniform_pm1(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

} // namespace

void ModelConfig::validate() const {
  if (input_features == 0 || lstm1_units == 0 || lstm2_units == 0 || lookback == 0) {
    throw Error(ErrorKind::InvalidArgument, "model dimensions must all be positive");
  }
}

std::size_t ModelConfig::parameter_count() const noexcept {
  const auto f = input_features, h1 = lstm1_units, h2 = lstm2_units;
  return 4 * h1 * (f + h1 + 1) + 4 * h2 * (h1 + h2 + 1) + (h2 + 1);
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  config.validate();
  values_.assign(config.parameter_count(), 0.0);
  const auto f = config.input_features, h1 = config.lstm1_units;
  layer2_offset_ = 4 * h1 * (f + h1 + 1);
  dense_offset_ = layer2_offset_ + 4 * config.lstm2_units * (h1 + config.lstm2_units + 1);
}

ModelParams::LayerOffsets ModelParams::layer(std::size_t index) const {
  const std::size_t in = index == 0 ? config_.input_features : config_.lstm1_units;
  const std::size_t h = index == 0 ? config_.lstm1_units : config_.lstm2_units;
  const std::size_t base = index == 0 ? 0 : layer2_offset_;
  return {base, base + 4 * h * in, base + 4 * h * (in + h), in, h};
}

bool ModelParams::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p(config);
  std::mt19937_64 rng(seed);
  auto v = p.values();
  for (std::size_t l = 0; l < 2; ++l) {
    auto o = p.layer(l);
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(o.in));
    const double rec_scale = 1.0 / std::sqrt(static_cast<double>(o.units));
    for (std::size_t i = o.input_weights; i < o.recurrent_weights; ++i) v[i] = uniform_pm1(rng) * in_scale;
    for (std::size_t i = o.recurrent_weights; i < o.bias; ++i) v[i] = uniform_pm1(rng) * rec_scale;
    for (std::size_t k = 0; k < o.units; ++k) v[o.bias + o.units + k] = 1.0;
  }
  const double dense_scale = 1.0 / std::sqrt(static_cast<double>(config.lstm2_units));
  for (std::size_t k = 0; k < config.lstm2_units; ++k) v[p.dense_weights() + k] = uniform_pm1(rng) * dense_scale;
  return p;
}

double forward(const ModelParams& params, std::span<const double> window) {
  Mat x = window_matrix(params, window);
  LayerTrace t1, t2;
  run_layer(view(params, 0), x, t1);
  run_layer(view(params, 1), t1.hidden, t2);
  const auto h2 = static_cast<Eigen::Index>(params.config().lstm2_units);
  ConstVecMap w(params.values().data() + params.dense_weights(), h2);
  double y = t2.hidden.row(t2.hidden.rows() - 1).dot(w) + params.values()[params.dense_bias()];
  if (!std::isfinite(y)) throw Error(ErrorKind::NonFinite, "model produced a non-finite output");
  return y;
}

double loss_mse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty() || predictions.size() != targets.size()) {
    throw Error(ErrorKind::InvalidArgument, "mse needs equal, non-empty sequences");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double d = predictions[i] - targets[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predictions.size());
}

Gradients backward(const ModelParams& params, std::span<const Sample> batch) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
  Gradients out{ModelParams(params.config()), 0.0};
  double* grad = out.grad.values().data();
  const auto& cfg = params.config();
  const auto h2 = static_cast<Eigen::Index>(cfg.lstm2_units);
  const double scale = 1.0 / static_cast<double>(batch.size());
  const auto l1 = view(params, 0), l2 = view(params, 1);
  ConstVecMap w(params.values().data() + params.dense_weights(), h2);
  LayerTrace t1, t2;
  for (const auto& sample : batch) {
    Mat x = window_matrix(params, sample.x);
    run_layer(l1, x, t1);
    run_layer(l2, t1.hidden, t2);
    const Eigen::Index last = t2.hidden.rows() - 1;
    double y = t2.hidden.row(last).dot(w) + params.values()[params.dense_bias()];
    double err = y - sample.y;
    if (!std::isfinite(err)) throw Error(ErrorKind::NonFinite, "non-finite prediction during backward");
    out.loss += err * err * scale;
    double dy = 2.0 * err * scale;
    VecMap(grad + params.dense_weights(), h2) += dy * t2.hidden.row(last).transpose();
    grad[params.dense_bias()] += dy;
    Mat dh2 = Mat::Zero(t2.hidden.rows(), h2);
    dh2.row(last) = dy * w.transpose();
    Mat dh1 = backprop_layer(l2, t1.hidden, t2, dh2, params.layer(1), grad);
    backprop_layer(l1, x, t1, dh1, params.layer(0), grad);
  }
  if (!out.grad.all_finite()) throw Error(ErrorKind::NonFinite, "non-finite gradient");
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || batch_size == 0 || !(gradient_clip_norm > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "train config needs learning_rate >= 0, batch_size > 0, gradient_clip_norm > 0");
  }
}

double dataset_mse(const ModelParams& params, const SampleSet& set) {
  if (set.empty()) throw Error(ErrorKind::InvalidArgument, "empty sample set");
  double sum = 0.0;
  for (const auto& s : set.samples) {
    double d = forward(params, s.x) - s.y;
    sum += d * d;
  }
  return sum / static_cast<double>(set.size());
}

TrainResult train(const ModelParams& params, const SampleSet& train_set, const SampleSet& val_set,
                  const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorKind::InvalidArgument, "empty training set");
  TrainResult result{params, {}, false};
  auto p = result.params.values();
  std::vector<double> m(p.size(), 0.0), v(p.size(), 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t step = 0;
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Sample> batch;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng() % i]);
      }
    }
    double epoch_loss = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        batch.clear();
        for (std::size_t k = start; k < stop; ++k) batch.push_back(train_set.samples[order[k]]);
        auto g = backward(result.params, batch);
        epoch_loss += g.loss * static_cast<double>(batch.size());
        auto gv = g.grad.values();
        double norm2 = 0.0;
        for (double d : gv) norm2 += d * d;
        double norm = std::sqrt(norm2);
        double clip = norm > config.gradient_clip_norm ? config.gradient_clip_norm / norm : 1.0;
        ++step;
        if (config.optimizer == Optimizer::Sgd) {
          for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * clip * gv[i];
        } else {
          double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
          double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
          for (std::size_t i = 0; i < p.size(); ++i) {
            double gi = clip * gv[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            p[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam_eps);
          }
        }
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      result.diverged = true;
      return result;
    }
    EpochLoss rec{epoch_loss / static_cast<double>(order.size()), std::nullopt};
    if (!val_set.empty()) {
      try {
        rec.val_mse = dataset_mse(result.params, val_set);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFinite) throw;
        rec.val_mse = std::numeric_limits<double>::quiet_NaN();
      }
    }
    result.history.push_back(rec);
    bool bad = !std::isfinite(rec.train_mse) || (rec.val_mse && !std::isfinite(*rec.val_mse)) ||
               !result.params.all_finite();
    if (bad) {
      result.diverged = true;
      return result;
    }
    if (config.stop_below_mse && rec.train_mse < *config.stop_below_mse) break;
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'A', 'C', 'H', 'L', 'S', 'T', 'M', '\0'};

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; add byte swapping for this platform");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorKind::BadInput, "model file is truncated");
  }
  return value;
}

} // namespace

void save_params(const ModelParams& params, std::ostream& sink) {
  const auto& c = params.config();
  sink.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(sink, kModelFormatVersion);
  put<std::uint64_t>(sink, c.input_features);
  put<std::uint64_t>(sink, c.lstm1_units);
  put<std::uint64_t>(sink, c.lstm2_units);
  put<std::uint64_t>(sink, c.lookback);
  put<std::uint64_t>(sink, params.size());
  sink.write(reinterpret_cast<const char*>(params.values().data()),
             static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!sink) throw Error(ErrorKind::Io, "failed writing model file");
}

ModelParams load_params(std::istream& source) {
  char magic[sizeof(kMagic)];
  if (!source.read(magic, sizeof(magic))) throw Error(ErrorKind::BadInput, "model file is truncated");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::BadInput, "not a model file (bad magic)");
  }
  auto version = get<std::uint32_t>(source);
  if (version != kModelFormatVersion) {
    throw Error(ErrorKind::FormatVersion,
                fmt::format("model format version {} unsupported (expected {})", version,
                            kModelFormatVersion));
  }
  ModelConfig cfg;
  cfg.input_features = get<std::uint64_t>(source);
  cfg.lstm1_units = get<std::uint64_t>(source);
  cfg.lstm2_units = get<std::uint64_t>(source);
  cfg.lookback = get<std::uint64_t>(source);
  cfg.validate();
  auto count = get<std::uint64_t>(source);
  if (count != cfg.parameter_count()) {
    throw Error(ErrorKind::ShapeMismatch,
                fmt::format("model file holds {} weights, config implies {}", count,
                            cfg.parameter_count()));
  }
  ModelParams p(cfg);
  if (!source.read(reinterpret_cast<char*>(p.values().data()),
                   static_cast<std::streamsize>(count * sizeof(double)))) {
    throw Error(ErrorKind::BadInput, "model file is truncated");
  }
  if (!p.all_finite()) throw Error(ErrorKind::NonFinite, "model file contains non-finite weights");
  return p;
}

} // namespace achilles
