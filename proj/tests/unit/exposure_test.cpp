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

#include "layerscope/exposure.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "layerscope/arch.hpp"

namespace layerscope {
namespace {

constexpr const char* kSmallArch = "4C3-MP-D25-8FC-4SM";

const Dataset& blobs() {
  static const Dataset data = [] {
    SyntheticSpec spec = testing::small_blobs_spec(11);
    spec.noise_sigma = 0.35;  // overlapping classes leave room to overfit
    spec.margin = 1.5;
    return gen_synthetic(spec);
  }();
  return data;
}

TrainConfig base_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs = 4;
  c.batch_size = 32;
  c.seed = seed;
  return c;
}

TrainConfig ft_config(std::size_t epochs, std::uint64_t seed = 0) {
  TrainConfig c = finetune_defaults();
  c.epochs = epochs;
  c.batch_size = 32;
  c.learning_rate = 0.01;
  c.seed = seed;
  return c;
}

struct Trained {
  PrivateSplit split;
  Model model;
};

Trained trained(std::uint64_t seed) {
  PrivateSplit split = split_private(blobs(), seed);
  const Model init = init_model(parse_arch(kSmallArch), {1, 8, 8}, seed);
  Model m = train(init, split.private_set, base_config(seed), init.freeze_mask()).model;
  return {std::move(split), std::move(m)};
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

TEST(ExposureRiskTest, Identities) {
  for (double e : {1e-6, 0.3, 2.0, 1e4}) {
    EXPECT_EQ(exposure_risk(e, e).value, 0.0);
    EXPECT_EQ(exposure_risk(e, 0.0).value, 1.0);
    EXPECT_FALSE(exposure_risk(e, e).undefined);
  }
}

TEST(ExposureRiskTest, ScaleInvariant) {
  for (double c : {1e-3, 0.5, 7.0, 1e6}) {
    for (auto [s, b] : {std::pair{0.4, 0.1}, std::pair{0.05, 0.07}, std::pair{-0.2, 0.3}}) {
      EXPECT_NEAR(exposure_risk(c * s, c * b).value, exposure_risk(s, b).value, 1e-12);
    }
  }
}

TEST(ExposureRiskTest, TinyEpsSIsUndefined) {
  const Risk r = exposure_risk(1e-12, 0.0);
  EXPECT_TRUE(r.undefined);
  EXPECT_TRUE(std::isnan(r.value));
  EXPECT_TRUE(exposure_risk(-5e-10, 0.1).undefined);
  EXPECT_FALSE(exposure_risk(2e-9, 0.0).undefined);
}

TEST(LayerExposureTest, ClampsAndNormalizes) {
  const LayerExposure a = make_layer_exposure(2, 0.2, -0.1, 16);
  EXPECT_NEAR(a.risk, 1.5, 1e-15);
  EXPECT_EQ(a.risk_clamped, 1.0);
  EXPECT_EQ(a.risk_per_neuron, 1.0 / 16.0);
  const LayerExposure b = make_layer_exposure(1, 0.1, 0.3, 8);
  EXPECT_EQ(b.risk_clamped, 0.0);
  const LayerExposure u = make_layer_exposure(1, 0.0, 0.3, 8);
  EXPECT_TRUE(u.undefined);
  EXPECT_TRUE(std::isnan(u.risk_per_neuron));
}

TEST(NeuronCountTest, FiltersForConvUnitsForFc) {
  const auto specs = parse_arch("32C3-64FC-10SM");
  EXPECT_EQ(neuron_count(specs[0], {32, 7, 7}), 32u);
  EXPECT_EQ(neuron_count(specs[1], {64}), 64u);
  EXPECT_EQ(neuron_count(specs[2], {10}), 10u);
}

TEST(ExposureLayersTest, HeadIsNotAnExposureLayer) {
  const Model m = init_model(with_dropout_before_fc(parse_arch(kVgg7Arch), 0.5), {1, 28, 28}, 0);
  EXPECT_EQ(num_exposure_layers(m), 7u);
}

TEST(GeneralizationErrorTest, SameSetsGiveZero) {
  const Trained t = trained(0);
  EXPECT_EQ(generalization_error(t.model, t.split.private_set, t.split.private_set), 0.0);
}

TEST(GeneralizationErrorTest, EqualsEvaluateDifferenceAndPerExampleMeans) {
  const Trained t = trained(1);
  const double eps = generalization_error(t.model, t.split.private_set, t.split.non_private_set);
  const double via_eval = evaluate(t.model, t.split.non_private_set).mean_cost -
                          evaluate(t.model, t.split.private_set).mean_cost;
  EXPECT_EQ(eps, via_eval);
  const double via_examples = mean(per_example_costs(t.model, t.split.non_private_set)) -
                              mean(per_example_costs(t.model, t.split.private_set));
  EXPECT_NEAR(eps, via_examples, 1e-12);
}

TEST(GeneralizationErrorTest, MemorizedSetAgainstCostlySet) {
  // A head that is certain on S's pixels and uniform on T's blank images.
  Dataset s;
  s.images = Tensor({4, 1, 2, 2});
  s.labels = {0, 1, 2, 3};
  for (std::size_t i = 0; i < 4; ++i) s.images[i * 4 + i] = 1.0;
  Dataset t{Tensor({4, 1, 2, 2}), {0, 1, 2, 3}, "t", 4};
  Model m = init_model(parse_arch("4SM"), {1, 2, 2}, 0);
  m.params(0).weights.value.fill(0.0);
  for (std::size_t i = 0; i < 4; ++i) m.params(0).weights.value[i * 4 + i] = 200.0;
  EXPECT_NEAR(generalization_error(m, s, t), std::log(4.0), 1e-12);
}

TEST(FinetuneTest, ZeroEpochsLeavesModelBitwise) {
  const Trained t = trained(2);
  for (std::size_t l = 1; l <= num_exposure_layers(t.model); ++l) {
    EXPECT_TRUE(bitwise_equal(make_ms(t.model, l, t.split.private_set, ft_config(0)), t.model));
    EXPECT_TRUE(bitwise_equal(make_mb(t.model, l, t.split.combined(), ft_config(0)), t.model));
  }
}

TEST(FinetuneTest, OnlyTargetLayerMoves) {
  const Trained t = trained(3);
  for (std::size_t l = 1; l <= 3; ++l) {
    const Model ms = make_ms(t.model, l, t.split.private_set, ft_config(10));
    const Model mb = make_mb(t.model, l, t.split.combined(), ft_config(10));
    for (std::size_t i = 0; i < t.model.num_param_layers(); ++i) {
      const bool target = i + 1 == l;
      EXPECT_EQ(bitwise_equal(ms.params(i).weights.value, t.model.params(i).weights.value), !target);
      EXPECT_EQ(bitwise_equal(ms.params(i).weights.value, mb.params(i).weights.value), !target);
    }
    EXPECT_EQ(ms.freeze_mask(), t.model.freeze_mask());
  }
}

TEST(FinetuneTest, FinetuningOnSRarelyRaisesCostOnS) {
  std::size_t improved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Trained t = trained(seed);
    const Model ms = make_ms(t.model, 3, t.split.private_set, ft_config(3, seed));
    improved += evaluate(ms, t.split.private_set).mean_cost <=
                evaluate(t.model, t.split.private_set).mean_cost;
  }
  EXPECT_GE(improved, 18u);
}

TEST(MeasureLayersTest, FeatureCacheIsBitwiseIdenticalToPlainPath) {
  const Trained t = trained(4);
  const std::vector<Cell> cached = measure_layers(t.model, t.split, ft_config(2), true);
  const std::vector<Cell> plain = measure_layers(t.model, t.split, ft_config(2), false);
  ASSERT_EQ(cached.size(), plain.size());
  for (std::size_t i = 0; i < cached.size(); ++i) {
    ASSERT_TRUE(cached[i].value && plain[i].value);
    EXPECT_EQ(cached[i].value->eps_s, plain[i].value->eps_s);
    EXPECT_EQ(cached[i].value->eps_b, plain[i].value->eps_b);
  }
}

TEST(MeasureLayersTest, ZeroEpochRiskIsExactlyZero) {
  const Trained t = trained(5);
  for (const Cell& c : measure_layers(t.model, t.split, ft_config(0))) {
    ASSERT_TRUE(c.value.has_value());
    if (c.value->undefined) continue;
    EXPECT_EQ(c.value->eps_s, c.value->eps_b);
    EXPECT_EQ(c.value->risk, 0.0);
  }
}

TEST(MeasureLayersTest, DivergentCellsAreExcluded) {
  const Trained t = trained(6);
  PrivateSplit poisoned = t.split;
  poisoned.private_set.images[0] = std::nan("");  // every fine-tune on S sees a NaN loss
  const std::vector<Cell> cells = measure_layers(t.model, poisoned, ft_config(1));
  ASSERT_EQ(cells.size(), num_exposure_layers(t.model));
  for (const Cell& c : cells) {
    EXPECT_FALSE(c.value.has_value());
    EXPECT_NE(c.error.find("diverged"), std::string::npos) << c.error;
  }
}

TEST(SummarizeTest, StudentTInterval) {
  const Stat s = summarize({1.0, 2.0, 3.0}, 0.95);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_NEAR(s.ci_half_width, 4.302652729911275 / std::sqrt(3.0), 1e-9);
  EXPECT_EQ(s.n, 3u);
  const Stat one = summarize({5.0}, 0.95);
  EXPECT_EQ(one.mean, 5.0);
  EXPECT_EQ(one.ci_half_width, 0.0);
  EXPECT_TRUE(std::isnan(summarize({}, 0.95).mean));
}

ExposureConfig small_config(std::vector<std::uint64_t> seeds) {
  ExposureConfig c;
  c.base_train = base_config();
  c.finetune = ft_config(2);
  c.seeds = std::move(seeds);
  return c;
}

TEST(MeasureAllTest, ReportIsDeterministicAcrossThreadCounts) {
  const auto specs = parse_arch(kSmallArch);
  ExposureConfig one = small_config({0, 1, 2});
  ExposureConfig two = one;
  two.threads = 2;
  const std::string a = report_json(measure_all(specs, blobs(), one));
  EXPECT_EQ(a, report_json(measure_all(specs, blobs(), two)));
  EXPECT_EQ(a, report_json(measure_all(specs, blobs(), one)));
}

TEST(MeasureAllTest, SingleRepeatFlagsZeroWidthInterval) {
  const ExposureReport r = measure_all(parse_arch(kSmallArch), blobs(), small_config({3}));
  EXPECT_FALSE(r.ci_defined);
  for (const LayerSummary& l : r.layers) EXPECT_EQ(l.risk.ci_half_width, 0.0);
  EXPECT_FALSE(nlohmann::json::parse(report_json(r))["ci_defined"].get<bool>());
}

TEST(MeasureAllTest, CsvHasOneRowPerExposureLayer) {
  const ExposureReport r = measure_all(parse_arch(kSmallArch), blobs(), small_config({0, 1}));
  EXPECT_TRUE(r.ci_defined);
  ASSERT_EQ(r.layers.size(), 2u);
  std::istringstream csv(report_csv(r));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line,
            "dataset,layer,eps_s_mean,eps_s_ci,eps_b_mean,eps_b_ci,risk_mean,risk_ci,neurons,"
            "risk_per_neuron_mean,risk_per_neuron_ci,excluded_cells");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 2u);
}

TEST(MeasureAllTest, EpsSAtLeastEpsBInMostCells) {
  ExposureConfig c = small_config({0, 1, 2, 3, 4});
  c.finetune = ft_config(5);
  const ExposureReport r = measure_all(parse_arch(kSmallArch), blobs(), c);
  std::size_t cells = 0, ordered = 0;
  for (const SeedRun& run : r.runs) {
    for (const Cell& cell : run.cells) {
      if (!cell.value) continue;
      ++cells;
      ordered += cell.value->eps_s >= cell.value->eps_b;
    }
  }
  ASSERT_GT(cells, 0u);
  EXPECT_GE(static_cast<double>(ordered), 0.9 * static_cast<double>(cells));
}

TEST(MeasureModelTest, MatchesManualPipeline) {
  const Trained t = trained(7);
  ExposureConfig c = small_config({7});
  const ExposureReport r = measure_model(t.model, t.split, c);
  TrainConfig ft = c.finetune;
  ft.seed = 7;  // fine-tuning shuffles with the run seed
  const std::vector<Cell> cells = measure_layers(t.model, t.split, ft);
  ASSERT_EQ(r.runs.size(), 1u);
  ASSERT_EQ(r.layers.size(), cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(r.layers[i].eps_s.mean, cells[i].value->eps_s);
  }
}

TEST(ExposureConfigTest, Validation) {
  ExposureConfig c;
  c.seeds.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.seeds = {0};
  c.ci_level = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace layerscope
