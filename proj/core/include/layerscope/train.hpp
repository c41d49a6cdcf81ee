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

#ifndef LAYERSCOPE_TRAIN_HPP_
#define LAYERSCOPE_TRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "layerscope/dataset.hpp"
#include "layerscope/model.hpp"

namespace layerscope {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  bool shuffle = true;

  // Throws std::invalid_argument on batch_size 0 or negative rates.
  void validate() const;
};

// Defaults for fine-tuning a single layer.
TrainConfig finetune_defaults();

struct EpochStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

// Sample order for one epoch: a seeded permutation (or identity when
// shuffling is off). Depends only on (seed, epoch, size).
std::vector<std::size_t> epoch_order(std::size_t size, const TrainConfig& config,
                                     std::size_t epoch);

// Mini-batch SGD with momentum on the layers left unfrozen by
// `freeze_mask`; frozen layers stay bitwise unchanged. Dropout is active.
//
// With `start_position` > 0 the dataset holds inputs of that layer (see
// features_at) and only layers [start_position, end) run; every
// parameterized layer before it must be frozen.
//
// Throws DivergenceError on a non-finite batch loss.
TrainResult train(const Model& model, const Dataset& data, const TrainConfig& config,
                  const std::vector<bool>& freeze_mask, std::size_t start_position = 0);

struct Evaluation {
  double accuracy = 0.0;
  double mean_cost = 0.0;
};

// Samples whose highest logit (lowest index on ties) is the label.
std::size_t count_correct(const Tensor& logits, std::span<const int> labels);

// Eval-mode accuracy (ties resolved to the lowest class index) and mean
// cross-entropy, summed in sample order.
Evaluation evaluate(const Model& model, const Dataset& data, std::size_t start_position = 0);

// Eval-mode cross-entropy of every sample.
std::vector<double> per_example_costs(const Model& model, const Dataset& data,
                                      std::size_t start_position = 0);

// Outputs of layers [0, position) for every sample: a dataset whose images
// are inputs of layer `position`. Requires no dropout before `position`, so
// the result is the same in train and eval mode.
Dataset features_at(const Model& model, const Dataset& data, std::size_t position);

}  // namespace layerscope

#endif  // LAYERSCOPE_TRAIN_HPP_
