#pragma once

#include "achilles/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace achilles {

/// Two stacked LSTM layers followed by a single linear output unit.
struct ModelConfig {
  std::size_t input_features = 7;
  std::size_t lstm1_units = 35;
  std::size_t lstm2_units = 20;
  std::size_t lookback = 120;

  void validate() const;
  /// 4*h1*(f+h1+1) + 4*h2*(h1+h2+1) + (h2+1)
  std::size_t parameter_count() const noexcept;
  bool operator==(const ModelConfig&) const = default;
};

/// Flat parameter storage. Per LSTM layer, in order: input weights (4h x in),
/// recurrent weights (4h x h), bias (4h), with gates stacked as
/// input, forget, cell, output. Then dense weights (h2) and dense bias.
/// Gradients use the same type and layout.
class ModelParams {
public:
  struct LayerOffsets {
    std::size_t input_weights;
    std::size_t recurrent_weights;
    std::size_t bias;
    std::size_t in;
    std::size_t units;
  };

  ModelParams() = default;
  /// Zero-filled parameters for `config`.
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  LayerOffsets layer(std::size_t index) const;
  std::size_t dense_weights() const noexcept { return dense_offset_; }
  std::size_t dense_bias() const noexcept { return dense_offset_ + config_.lstm2_units; }

  bool all_finite() const noexcept;
  bool operator==(const ModelParams&) const = default;

private:
  ModelConfig config_;
  std::vector<double> values_;
  std::size_t layer2_offset_ = 0;
  std::size_t dense_offset_ = 0;
};

/// Seed-deterministic: input weights U(-1,1)/sqrt(fan_in), recurrent weights
/// U(-1,1)/sqrt(units), forget-gate bias 1, every other bias 0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Prediction for one window (lookback x input_features, row-major).
double forward(const ModelParams& params, std::span<const double> window);

double loss_mse(std::span<const double> predictions, std::span<const double> targets);

struct Gradients {
  ModelParams grad; ///< d(mean squared error)/d(params)
  double loss = 0.0; ///< mean squared error of the batch
};

/// Backpropagation through time over a batch. Throws NonFinite when an
/// intermediate value overflows.
Gradients backward(const ModelParams& params, std::span<const Sample> batch);

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double gradient_clip_norm = 1.0;
  Optimizer optimizer = Optimizer::Sgd;
  bool shuffle = true;
  /// Stop after the first epoch whose train_mse falls below this value.
  std::optional<double> stop_below_mse;

  void validate() const;
};

struct EpochLoss {
  double train_mse = 0.0;
  std::optional<double> val_mse;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLoss> history;
  bool diverged = false;
};

/// Mini-batch descent with global-norm clipping. `train_mse` is the mean
/// per-sample loss seen during the epoch. Divergence stops early and keeps
/// the history gathered so far.
TrainResult train(const ModelParams& params, const SampleSet& train_set, const SampleSet& val_set,
                  const TrainConfig& config);

/// Mean squared error of one-step predictions over a sample set.
double dataset_mse(const ModelParams& params, const SampleSet& set);

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_params(const ModelParams& params, std::ostream& sink);
ModelParams load_params(std::istream& source);

} // namespace achilles
