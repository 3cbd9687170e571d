#include "achilles/error.hpp"
#include "achilles/model.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

using namespace achilles;

namespace {

ModelConfig tiny() { return {3, 4, 3, 5}; }

std::vector<Sample> random_batch(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out(n);
  for (auto& s : out) {
    s.x.resize(c.lookback * c.input_features);
    for (auto& v : s.x) v = oracle::uniform01(rng);
    s.y = oracle::uniform01(rng);
  }
  return out;
}

SampleSet as_set(std::vector<Sample> samples) {
  SampleSet set;
  set.samples = std::move(samples);
  return set;
}

} // namespace

TEST(ModelConfig, ParameterCount) {
  EXPECT_EQ(ModelConfig{}.parameter_count(), 10521u);
  EXPECT_EQ(ModelParams(ModelConfig{}).size(), 10521u);
  // Figure quoted for the same shape; it does not follow from the layer sizes.
  EXPECT_NE(ModelConfig{}.parameter_count(), 9544u);
  EXPECT_EQ(tiny().parameter_count(), 4u * 4 * (3 + 4 + 1) + 4u * 3 * (4 + 3 + 1) + 4u);
  EXPECT_THROW(ModelParams(ModelConfig{0, 1, 1, 1}), Error);
}

TEST(ModelConfig, SmallestShape) {
  EXPECT_EQ((ModelConfig{1, 1, 1, 1}.parameter_count()), 26u);
}

TEST(ModelParams, LayoutIsContiguous) {
  ModelParams p(tiny());
  auto l1 = p.layer(0), l2 = p.layer(1);
  EXPECT_EQ(l1.input_weights, 0u);
  EXPECT_EQ(l1.recurrent_weights, 16u * 3);
  EXPECT_EQ(l1.bias, 16u * 3 + 16u * 4);
  EXPECT_EQ(l2.input_weights, l1.bias + 16);
  EXPECT_EQ(l2.in, 4u);
  EXPECT_EQ(p.dense_weights(), l2.bias + 12);
  EXPECT_EQ(p.dense_bias() + 1, p.size());
}

TEST(Init, DeterministicPerSeed) {
  auto a = init_params(tiny(), 42), b = init_params(tiny(), 42), c = init_params(tiny(), 43);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  auto l1 = a.layer(0);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(a.values()[l1.bias + k], 0.0);
    EXPECT_EQ(a.values()[l1.bias + 4 + k], 1.0);
  }
  for (std::size_t i = 0; i < l1.recurrent_weights; ++i) EXPECT_LE(std::abs(a.values()[i]), 1.0 / std::sqrt(3.0));
}

TEST(Forward, MatchesScalarReference) {
  auto p = init_params(tiny(), 7);
  for (const auto& s : random_batch(tiny(), 5, 1)) {
    EXPECT_NEAR(forward(p, s.x), oracle::reference_forward(p, s.x), 1e-12);
  }
}

TEST(Forward, RejectsBadWindows) {
  auto p = init_params(tiny(), 7);
  std::vector<double> shortw(14, 0.0);
  EXPECT_THROW(forward(p, shortw), Error);
  std::vector<double> w(15, 0.0);
  w[3] = std::nan("");
  try {
    forward(p, w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
}

TEST(Forward, FeatureCountMismatchIsShapeError) {
  auto p = init_params(ModelConfig{7, 4, 3, 2}, 1);
  std::vector<double> five_features(2 * 5, 0.5);
  try {
    forward(p, five_features);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(LossMse, HandValue) {
  std::vector<double> p{1, 2, 3}, t{1, 4, 0};
  EXPECT_DOUBLE_EQ(loss_mse(p, t), (0.0 + 4.0 + 9.0) / 3.0);
}

TEST(Backward, MatchesCentralDifferences) {
  auto p = init_params(tiny(), 3);
  auto batch = random_batch(tiny(), 3, 9);
  auto g = backward(p, batch);
  auto num = oracle::numeric_gradient(p, batch);
  double worst = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    worst = std::max(worst, oracle::relative_error(g.grad.values()[i], num[i], 1e-6));
  }
  EXPECT_LT(worst, 1e-4);
  std::vector<double> preds;
  std::vector<double> ys;
  for (const auto& s : batch) {
    preds.push_back(forward(p, s.x));
    ys.push_back(s.y);
  }
  EXPECT_NEAR(g.loss, loss_mse(preds, ys), 1e-14);
}

TEST(Train, ZeroLearningRateLeavesWeights) {
  auto p = init_params(tiny(), 5);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 2;
  auto r = train(p, as_set(random_batch(tiny(), 10, 2)), SampleSet{}, tc);
  EXPECT_EQ(r.params, p);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_DOUBLE_EQ(r.history[0].train_mse, r.history[1].train_mse);
}

TEST(Train, ZeroEpochsLeavesWeights) {
  auto p = init_params(tiny(), 5);
  TrainConfig tc;
  tc.epochs = 0;
  auto r = train(p, as_set(random_batch(tiny(), 10, 2)), SampleSet{}, tc);
  EXPECT_EQ(r.params, p);
  EXPECT_TRUE(r.history.empty());
}

TEST(Train, DeterministicAndDecreasing) {
  auto p = init_params(tiny(), 5);
  auto data = as_set(random_batch(tiny(), 24, 4));
  TrainConfig tc;
  tc.optimizer = Optimizer::Adam;
  tc.learning_rate = 1e-2;
  tc.epochs = 20;
  tc.batch_size = 8;
  auto a = train(p, data, data, tc);
  auto b = train(p, data, data, tc);
  EXPECT_EQ(a.params, b.params);
  EXPECT_FALSE(a.diverged);
  ASSERT_EQ(a.history.size(), 20u);
  EXPECT_LT(*a.history.back().val_mse, *a.history.front().val_mse);
}

TEST(Train, StopsEarlyBelowTarget) {
  auto p = init_params(tiny(), 5);
  TrainConfig tc;
  tc.epochs = 50;
  tc.stop_below_mse = 1e9;
  auto r = train(p, as_set(random_batch(tiny(), 4, 4)), SampleSet{}, tc);
  EXPECT_EQ(r.history.size(), 1u);
}

TEST(Train, DivergenceIsReported) {
  auto p = init_params(tiny(), 5);
  auto data = random_batch(tiny(), 4, 4);
  for (auto& s : data) s.y = 1e300;
  TrainConfig tc;
  tc.epochs = 3;
  auto r = train(p, as_set(data), SampleSet{}, tc);
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(r.history.size(), 3u);
}

TEST(Train, InvalidConfig) {
  TrainConfig tc;
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), Error);
  tc = {};
  tc.learning_rate = -1.0;
  EXPECT_THROW(tc.validate(), Error);
  EXPECT_THROW(train(init_params(tiny(), 1), SampleSet{}, SampleSet{}, TrainConfig{}), Error);
}

TEST(ModelFile, RoundTripIsBitExact) {
  auto p = init_params(ModelConfig{}, 11);
  std::stringstream buf;
  save_params(p, buf);
  auto q = load_params(buf);
  EXPECT_EQ(p, q);
}

TEST(ModelFile, RejectsDamage) {
  auto p = init_params(tiny(), 11);
  std::stringstream buf;
  save_params(p, buf);
  const std::string bytes = buf.str();

  auto kind_of = [](const std::string& data) {
    std::istringstream in(data);
    try {
      load_params(in);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  EXPECT_EQ(kind_of(bytes.substr(0, bytes.size() - 3)), ErrorKind::BadInput);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of(bad_magic), ErrorKind::BadInput);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_EQ(kind_of(bad_version), ErrorKind::FormatVersion);
  std::string bad_count = bytes;
  bad_count[8 + 4 + 32] ^= 1;
  EXPECT_EQ(kind_of(bad_count), ErrorKind::ShapeMismatch);
}
