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


#ifndef LAYERSCOPE_EXPOSURE_HPP_
#define LAYERSCOPE_EXPOSURE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "layerscope/dataset.hpp"
#include "layerscope/model.hpp"
#include "layerscope/train.hpp"

namespace layerscope {

// Below this magnitude of eps_s the risk ratio is reported as undefined.
inline constexpr double kUndefinedEpsS = 1e-9;

// mean_cost(T) - mean_cost(S), both evaluated in eval mode.
double generalization_error(const Model& model, const Dataset& s, const Dataset& t,
                            std::size_t start_position = 0);

// Copy of `model` with only parameterized layer `layer` (1-based) trained on
// `data` under `finetune`; every other parameter is bitwise unchanged.
// make_ms fine-tunes on S, make_mb on X = concat(S, T).
Model finetune_layer(const Model& model, std::size_t layer, const Dataset& data,
                     const TrainConfig& finetune, std::size_t start_position = 0);
Model make_ms(const Model& model, std::size_t layer, const Dataset& s,
              const TrainConfig& finetune);
Model make_mb(const Model& model, std::size_t layer, const Dataset& x,
              const TrainConfig& finetune);

struct Risk {
  double value = 0.0;  // NaN when undefined
  bool undefined = false;
};

// (eps_s - eps_b) / eps_s, undefined when |eps_s| < kUndefinedEpsS.
Risk exposure_risk(double eps_s, double eps_b);

// Layers whose exposure is measured: every parameterized layer except the
// softmax head, which belongs to the cost computation. Numbered 1..n in
// stack order, matching parameterized-layer indices 0..n-1.
std::size_t num_exposure_layers(const Model& model);

// Filters for a conv layer, output units for a fully connected layer.
std::size_t neuron_count(const LayerSpec& spec, const Shape& output_shape);

struct LayerExposure {
  std::size_t layer = 0;  // 1-based parameterized-layer index
  double eps_s = 0.0;
  double eps_b = 0.0;
  double risk = 0.0;          // raw; NaN when undefined
  double risk_clamped = 0.0;  // clamped to [0, 1]; NaN when undefined
  std::size_t neurons = 0;
  double risk_per_neuron = 0.0;
  bool undefined = false;
};

LayerExposure make_layer_exposure(std::size_t layer, double eps_s, double eps_b,
                                  std::size_t neurons);

struct ExposureConfig {
  TrainConfig base_train;
  TrainConfig finetune = finetune_defaults();
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  double ci_level = 0.95;
  std::size_t threads = 1;
  // Reuse frozen-prefix activations across fine-tunes. Results are bitwise
  // identical to the uncached path; this only trades memory for time.
  bool feature_cache = true;
  std::size_t feature_cache_bytes = std::size_t{512} << 20;

  // Throws std::invalid_argument when no seeds are given or ci_level is
  // outside (0, 1).
  void validate() const;
};

// One (layer, seed) measurement, or the reason it was excluded.
struct Cell {
  std::optional<LayerExposure> value;
  std::string error;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::string error;  // base training failure; all cells excluded
  EpochStats final_epoch;
  Evaluation base_s;
  Evaluation base_t;
  std::optional<Evaluation> base_test;
  std::vector<Cell> cells;  // one per parameterized layer
};

// Fine-tunes every parameterized layer of a trained model on the split and
// records eps_s, eps_b and risk per layer. Divergent cells are excluded.
std::vector<Cell> measure_layers(const Model& model, const PrivateSplit& split,
                                 const TrainConfig& finetune, bool feature_cache = true,
                                 std::size_t feature_cache_bytes = std::size_t{512} << 20);

struct Stat {
  double mean = 0.0;
  double ci_half_width = 0.0;
  std::size_t n = 0;
};

// Mean and Student-t confidence half-width (n - 1 degrees of freedom).
// Half-width is 0 for n < 2; mean is NaN for n == 0.
Stat summarize(const std::vector<double>& values, double level);

struct LayerSummary {
  std::size_t layer = 0;
  std::string token;
  std::size_t neurons = 0;
  Stat eps_s;
  Stat eps_b;
  Stat risk;  // clamped
  Stat risk_raw;
  Stat risk_per_neuron;
  std::size_t excluded_cells = 0;
  std::size_t undefined_cells = 0;
  std::size_t sign_anomalies = 0;  // cells with eps_s < eps_b
};

struct ExposureReport {
  std::string arch;
  std::string dataset;
  std::size_t dataset_size = 0;
  ExposureConfig config;
  bool ci_defined = false;  // false with a single repeat
  std::vector<SeedRun> runs;
  std::vector<LayerSummary> layers;
};

// Full pipeline per seed: split X, train the base model on S from a fresh
// initialization, then measure every layer. Seeds run in parallel (up to
// config.threads); aggregation is in seed order, so the report does not
// depend on scheduling.
ExposureReport measure_all(const std::vector<LayerSpec>& specs, const Dataset& x,
                           const ExposureConfig& config, const Dataset* test = nullptr);

// Single measurement of an already trained model on a given split.
ExposureReport measure_model(const Model& model, const PrivateSplit& split,
                             const ExposureConfig& config, const Dataset* test = nullptr);

// Rebuilds the per-layer summaries from `report.runs`.
void aggregate(ExposureReport& report);

std::string report_json(const ExposureReport& report);
std::string report_csv(const ExposureReport& report);

}  // namespace layerscope

#endif  // LAYERSCOPE_EXPOSURE_HPP_
