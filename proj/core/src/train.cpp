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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

constexpr std::size_t kEvalChunk = 256;

void check_sample_shape(const Model& model, const Dataset& data, std::size_t position) {
  if (data.size() == 0) throw std::invalid_argument("dataset is empty");
  if (data.sample_shape() != model.layer_input_shape(position)) {
    throw ShapeError("dataset samples are " + shape_string(data.sample_shape()) + ", layer " +
                     std::to_string(position + 1) + " expects " +
                     shape_string(model.layer_input_shape(position)));
  }
}

// Runs `fn(indices)` over consecutive chunks of the dataset.
template <typename Fn>
void for_each_chunk(std::size_t size, Fn&& fn) {
  std::vector<std::size_t> indices;
  for (std::size_t offset = 0; offset < size; offset += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, size - offset);
    indices.resize(count);
    std::iota(indices.begin(), indices.end(), offset);
    fn(std::span<const std::size_t>(indices));
  }
}

}  // namespace

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const std::size_t classes = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const double* row = logits.raw() + n * classes;
    std::size_t best = 0;
    for (std::size_t k = 1; k < classes; ++k) {
      if (row[k] > row[best]) best = k;
    }
    if (static_cast<int>(best) == labels[n]) ++correct;
  }
  return correct;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must be in [0, 1)");
  }
}

TrainConfig finetune_defaults() {
  TrainConfig config;
  config.epochs = 10;
  config.learning_rate = 0.001;
  return config;
}

std::vector<std::size_t> epoch_order(std::size_t size, const TrainConfig& config,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0xe90cu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

TrainResult train(const Model& model, const Dataset& data, const TrainConfig& config,
                  const std::vector<bool>& freeze_mask, std::size_t start_position) {
  config.validate();
  TrainResult result{model, {}};
  Model& m = result.model;
  m.set_freeze_mask(freeze_mask);
  check_sample_shape(m, data, start_position);

  std::optional<std::size_t> stop;
  for (std::size_t i = 0; i < m.num_param_layers(); ++i) {
    if (freeze_mask[i]) continue;
    if (m.param_position(i) < start_position) {
      throw std::invalid_argument("layer " + std::to_string(i + 1) +
                                  " is trainable but precedes the training start position");
    }
    if (!stop) stop = m.param_position(i);
  }

  SgdMomentum optimizer(m, config.learning_rate, config.momentum);
  const std::size_t n = data.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(n, config, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch = 0;
    for (std::size_t offset = 0; offset < n; offset += config.batch_size, ++batch) {
      const std::span<const std::size_t> idx =
          std::span(order).subspan(offset, std::min(config.batch_size, n - offset));
      const Tensor x = data.gather(idx);
      const std::vector<int> y = data.gather_labels(idx);

      ForwardTrace trace;
      const Tensor logits = forward(m, x, Mode::kTrain, {config.seed, epoch, batch},
                                    stop ? &trace : nullptr, start_position);
      kernels::SoftmaxCrossEntropy ce = kernels::softmax_cross_entropy(logits, y);
      if (!std::isfinite(ce.loss)) throw DivergenceError(epoch, batch);
      loss_sum += ce.loss * static_cast<double>(idx.size());
      correct += count_correct(logits, y);

      if (stop) {
        backward(m, trace, kernels::softmax_cross_entropy_backward(ce.probs, y), *stop, false);
        optimizer.step(m);
      }
    }
    result.history.push_back(
        {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)});
  }
  return result;
}

std::vector<double> per_example_costs(const Model& model, const Dataset& data,
                                      std::size_t start_position) {
  check_sample_shape(model, data, start_position);
  std::vector<double> costs;
  costs.reserve(data.size());
  for_each_chunk(data.size(), [&](std::span<const std::size_t> idx) {
    const Tensor logits =
        forward(model, data.gather(idx), Mode::kEval, {}, nullptr, start_position);
    const auto ce = kernels::softmax_cross_entropy(logits, data.gather_labels(idx));
    costs.insert(costs.end(), ce.losses.begin(), ce.losses.end());
  });
  return costs;
}

Evaluation evaluate(const Model& model, const Dataset& data, std::size_t start_position) {
  check_sample_shape(model, data, start_position);
  double total = 0.0;
  std::size_t correct = 0;
  for_each_chunk(data.size(), [&](std::span<const std::size_t> idx) {
    const Tensor logits =
        forward(model, data.gather(idx), Mode::kEval, {}, nullptr, start_position);
    const std::vector<int> labels = data.gather_labels(idx);
    const auto ce = kernels::softmax_cross_entropy(logits, labels);
    for (double loss : ce.losses) total += loss;
    correct += count_correct(logits, labels);
  });
  const auto n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, total / n};
}

Dataset features_at(const Model& model, const Dataset& data, std::size_t position) {
  check_sample_shape(model, data, 0);
  for (std::size_t pos = 0; pos < position; ++pos) {
    if (model.specs()[pos].kind == LayerKind::kDropout) {
      throw std::invalid_argument("features_at: dropout before position " +
                                  std::to_string(position) + " makes the prefix stochastic");
    }
  }
  Shape shape{data.size()};
  const Shape& sample = model.layer_input_shape(position);
  shape.insert(shape.end(), sample.begin(), sample.end());
  Dataset out{Tensor(shape), data.labels, data.name, data.num_classes};
  const std::size_t stride = shape_size(sample);
  for_each_chunk(data.size(), [&](std::span<const std::size_t> idx) {
    const Tensor y = forward(model, data.gather(idx), Mode::kEval, {}, nullptr, 0, position);
    std::copy(y.raw(), y.raw() + y.size(), out.images.raw() + idx.front() * stride);
  });
  return out;
}

}  // namespace layerscope
