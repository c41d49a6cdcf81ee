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

#ifndef LAYERSCOPE_MODEL_HPP_
#define LAYERSCOPE_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "layerscope/arch.hpp"
#include "layerscope/kernels.hpp"
#include "layerscope/tensor.hpp"

namespace layerscope {

using kernels::Mode;

struct LayerParams {
  ParamTensor weights;  // Conv: [F,C,K,K]; FullyConnected: [D,U]
  ParamTensor bias;
};

// An ordered layer stack with one LayerParams per parameterized layer.
//
// Stack positions count every layer (0-based). Parameterized layers are
// additionally numbered 0..L_p-1 in stack order; the public "layer l" used by
// the exposure measurement is that index plus one.
//
// A model may be a suffix of a larger stack (`position_offset` > 0); dropout
// streams are keyed by absolute position so a suffix reproduces the masks of
// the full model.
class Model {
 public:
  Model() = default;
  // Validates shapes and allocates zero parameters. Throws ShapeError when
  // the stack does not fit `input_shape` (per-sample, e.g. {1,28,28}).
  Model(std::vector<LayerSpec> specs, Shape input_shape, std::uint64_t seed,
        std::size_t position_offset = 0);

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::string arch() const { return format_arch(specs_); }
  const Shape& input_shape() const { return input_shape_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t position_offset() const { return position_offset_; }

  std::size_t num_layers() const { return specs_.size(); }
  std::size_t num_param_layers() const { return params_.size(); }
  std::size_t num_classes() const { return specs_.back().size; }

  const Shape& layer_input_shape(std::size_t position) const { return in_shapes_.at(position); }
  const Shape& layer_output_shape(std::size_t position) const {
    return out_shapes_.at(position);
  }

  std::optional<std::size_t> param_index(std::size_t position) const;
  std::size_t param_position(std::size_t param_index) const {
    return param_positions_.at(param_index);
  }

  LayerParams& params(std::size_t param_index) { return params_.at(param_index); }
  const LayerParams& params(std::size_t param_index) const { return params_.at(param_index); }

  std::vector<bool> freeze_mask() const;
  void set_freeze_mask(const std::vector<bool>& mask);

  // Total scalar parameters (weights + biases).
  std::size_t parameter_count() const;

  // Layers [cut, end) as a standalone model carrying copies of their
  // parameters.
  Model suffix(std::size_t cut) const;

 private:
  std::vector<LayerSpec> specs_;
  Shape input_shape_;
  std::uint64_t seed_ = 0;
  std::size_t position_offset_ = 0;
  std::vector<Shape> in_shapes_, out_shapes_;
  std::vector<std::size_t> param_positions_;
  std::vector<LayerParams> params_;
};

inline constexpr double kHeadInitScale = 0.1;

// Hidden-layer weights drawn from Normal(0, sqrt(2 / fan_in)); the softmax
// head uses kHeadInitScale times that deviation. Biases zero, everything
// unfrozen. Deterministic in `seed`.
Model init_model(std::vector<LayerSpec> specs, Shape input_shape, std::uint64_t seed);

// Parameter values bitwise equal (architecture and shapes included).
bool bitwise_equal(const Model& a, const Model& b);
double max_param_diff(const Model& a, const Model& b);

// --- forward / backward -----------------------------------------------------

// Identifies one training step; dropout masks are derived from it.
struct StepKey {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;
};

std::mt19937_64 dropout_stream(const StepKey& key, std::size_t absolute_position);

struct LayerTrace {
  Tensor input;   // kept for Conv / FullyConnected
  Shape input_shape;
  Tensor output;  // kept for layers with a ReLU
  std::vector<std::size_t> argmax;
  Tensor mask;
};

struct ForwardTrace {
  std::size_t begin = 0;
  std::vector<LayerTrace> layers;  // layers[i] belongs to position begin + i
};

inline constexpr std::size_t kToEnd = std::numeric_limits<std::size_t>::max();

// Runs layers [begin, end) on a [N, ...] batch that has the input shape of
// layer `begin`. Records what backward() needs when `trace` is non-null.
Tensor forward(const Model& model, const Tensor& input, Mode mode, const StepKey& key,
               ForwardTrace* trace, std::size_t begin = 0, std::size_t end = kToEnd);

// Propagates `grad_out` (gradient w.r.t. the output of the traced range)
// down to position `stop`. Writes parameter gradients for every unfrozen
// parameterized layer in [stop, end). Returns the gradient w.r.t. the input
// of `stop` when `want_input_grad`, otherwise an empty tensor.
Tensor backward(Model& model, const ForwardTrace& trace, Tensor grad_out, std::size_t stop,
                bool want_input_grad);

// SGD with heavy-ball momentum: v = momentum * v + g; w -= lr * v.
class SgdMomentum {
 public:
  SgdMomentum(const Model& model, double learning_rate, double momentum);
  // Updates unfrozen parameterized layers with index in [first, last).
  void step(Model& model, std::size_t first = 0, std::size_t last = kToEnd);

  struct Velocity {
    Tensor weights;
    Tensor bias;
  };
  const std::vector<Velocity>& velocity() const { return velocity_; }

 private:
  double learning_rate_;
  double momentum_;
  std::vector<Velocity> velocity_;
};

}  // namespace layerscope

#endif  // LAYERSCOPE_MODEL_HPP_
