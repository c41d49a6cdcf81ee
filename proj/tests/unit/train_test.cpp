// Copyright 2026 The LayerScope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "layerscope/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "layerscope/arch.hpp"
#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

const Dataset& blobs() {
  static const Dataset data = gen_synthetic(testing::small_blobs_spec());
  return data;
}

Model small_model(std::uint64_t seed, const char* arch = "4C3-MP-D25-8FC-4SM") {
  return init_model(parse_arch(arch), {1, 8, 8}, seed);
}

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 32;
  c.seed = seed;
  return c;
}

TEST(TrainTest, AllFrozenLeavesParametersUntouched) {
  const Model m = small_model(1);
  const TrainResult r = train(m, blobs(), quick(3), std::vector<bool>(3, true));
  EXPECT_TRUE(bitwise_equal(r.model, m));
  EXPECT_EQ(r.history.size(), 3u);
}

TEST(TrainTest, ZeroEpochsIsIdentity) {
  const Model m = small_model(1);
  const TrainResult r = train(m, blobs(), quick(0), m.freeze_mask());
  EXPECT_TRUE(bitwise_equal(r.model, m));
  EXPECT_TRUE(r.history.empty());
}

TEST(TrainTest, FrozenLayersStayBitwiseEqual) {
  const Model m = small_model(2);
  for (std::size_t trainable = 0; trainable < 3; ++trainable) {
    std::vector<bool> mask(3, true);
    mask[trainable] = false;
    const TrainResult r = train(m, blobs(), quick(2), mask);
    for (std::size_t i = 0; i < 3; ++i) {
      const bool same = bitwise_equal(r.model.params(i).weights.value, m.params(i).weights.value) &&
                        bitwise_equal(r.model.params(i).bias.value, m.params(i).bias.value);
      EXPECT_EQ(same, i != trainable) << "trainable " << trainable << ", layer " << i;
    }
  }
}

TEST(TrainTest, TwoLayerModelSeparatesBlobs) {
  const TrainResult r = train(small_model(3, "8FC-4SM"), blobs(), quick(30), {false, false});
  EXPECT_GE(r.history.back().accuracy, 0.95);
  EXPECT_GE(evaluate(r.model, blobs()).accuracy, 0.95);
}

TEST(TrainTest, LossDropsForNearlyEverySeed) {
  std::size_t dropped = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Model m = small_model(seed);
    const double before = evaluate(m, blobs()).mean_cost;
    const TrainResult r = train(m, blobs(), quick(3, seed), m.freeze_mask());
    dropped += evaluate(r.model, blobs()).mean_cost < before;
  }
  EXPECT_GE(dropped, 19u);
}

TEST(TrainTest, SameInputsSameModel) {
  const Model m = small_model(4);
  const TrainResult a = train(m, blobs(), quick(2, 7), m.freeze_mask());
  const TrainResult b = train(m, blobs(), quick(2, 7), m.freeze_mask());
  EXPECT_TRUE(bitwise_equal(a.model, b.model));
  const TrainResult c = train(m, blobs(), quick(2, 8), m.freeze_mask());
  EXPECT_FALSE(bitwise_equal(a.model, c.model));
}

TEST(TrainTest, NonFiniteLossThrowsDivergence) {
  Dataset bad = blobs().head(40);
  bad.images.fill(1e308);
  const Model m = small_model(0, "8FC-4SM");
  try {
    train(m, bad, quick(1), m.freeze_mask());
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 0u);
    EXPECT_EQ(e.batch(), 0u);
  }
}

TEST(TrainTest, RejectsBadConfigAndShape) {
  const Model m = small_model(0);
  TrainConfig c = quick(1);
  c.batch_size = 0;
  EXPECT_THROW(train(m, blobs(), c, m.freeze_mask()), std::invalid_argument);
  c = quick(1);
  c.momentum = 1.0;
  EXPECT_THROW(train(m, blobs(), c, m.freeze_mask()), std::invalid_argument);
  const Model wide = init_model(parse_arch("4SM"), {1, 9, 9}, 0);
  EXPECT_THROW(train(wide, blobs(), quick(1), wide.freeze_mask()), ShapeError);
}

TEST(TrainTest, FeatureStartMatchesFullStack) {
  Model m = small_model(5, "4C3-MP-8FC-4SM");
  const std::vector<bool> mask = {true, false, false};
  const Dataset features = features_at(m, blobs(), 2);
  const TrainResult full = train(m, blobs(), quick(2), mask);
  const TrainResult cached = train(m, features, quick(2), mask, 2);
  EXPECT_TRUE(bitwise_equal(full.model, cached.model));
  EXPECT_EQ(full.history.back().mean_loss, cached.history.back().mean_loss);
  EXPECT_THROW(train(m, features, quick(1), m.freeze_mask(), 2), std::invalid_argument);
}

TEST(TrainTest, FeaturesRejectDropoutInPrefix) {
  const Model m = small_model(0);
  EXPECT_THROW(features_at(m, blobs(), 3), std::invalid_argument);
  EXPECT_NO_THROW(features_at(m, blobs(), 2));
}

TEST(EpochOrderTest, SeededPermutation) {
  const TrainConfig c = quick(1, 11);
  std::vector<std::size_t> a = epoch_order(100, c, 0);
  EXPECT_EQ(a, epoch_order(100, c, 0));
  EXPECT_NE(a, epoch_order(100, c, 1));
  std::sort(a.begin(), a.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(a[i], i);
  TrainConfig plain = c;
  plain.shuffle = false;
  EXPECT_EQ(epoch_order(5, plain, 3), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(EvaluateTest, RepeatedEvaluationIsBitwiseStable) {
  const Model m = small_model(6);
  const Evaluation a = evaluate(m, blobs());
  const Evaluation b = evaluate(m, blobs());
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.mean_cost, b.mean_cost);
}

TEST(EvaluateTest, ConfidentCorrectModelScoresPerfectly) {
  // One-hot pixels and a head that reads them with a huge gain.
  Dataset d;
  d.images = Tensor({4, 1, 2, 2});
  d.labels = {0, 1, 2, 3};
  for (std::size_t i = 0; i < 4; ++i) d.images[i * 4 + i] = 1.0;
  Model m = init_model(parse_arch("4SM"), {1, 2, 2}, 0);
  m.params(0).weights.value.fill(0.0);
  for (std::size_t i = 0; i < 4; ++i) m.params(0).weights.value[i * 4 + i] = 100.0;
  const Evaluation e = evaluate(m, d);
  EXPECT_EQ(e.accuracy, 1.0);
  EXPECT_NEAR(e.mean_cost, 0.0, 1e-12);
}

TEST(EvaluateTest, UntrainedTenClassModelIsNearUniform) {
  SyntheticSpec spec;
  spec.num_classes = 10;
  spec.per_class = 20;
  spec.image_shape = {1, 28, 28};
  spec.margin = 3.0;
  const Dataset d = gen_synthetic(spec);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    total += evaluate(init_model(parse_arch(kVgg7Arch), {1, 28, 28}, seed), d).mean_cost;
  }
  EXPECT_NEAR(total / 5.0, std::log(10.0), 0.05 * std::log(10.0));
}

TEST(CountCorrectTest, TiesResolveToLowestIndex) {
  const Tensor logits({2, 3}, std::vector<double>{1, 1, 0, 0, 2, 2});
  EXPECT_EQ(count_correct(logits, std::vector<int>{0, 1}), 2u);
  EXPECT_EQ(count_correct(logits, std::vector<int>{1, 2}), 0u);
}

TEST(FinetuneDefaultsTest, TenEpochsAtSmallRate) {
  const TrainConfig c = finetune_defaults();
  EXPECT_EQ(c.epochs, 10u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 0.001);
  EXPECT_EQ(c.batch_size, 128u);
  EXPECT_DOUBLE_EQ(c.momentum, 0.9);
}

}  // namespace
}  // namespace layerscope
