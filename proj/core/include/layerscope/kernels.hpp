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

// Forward and backward kernels for the layer types of small VGG-style
// networks. All kernels are pure functions of their arguments. Each sample of
// a batch is computed independently with a fixed summation order, so a
// sample's output never depends on which other samples share its batch.

#ifndef LAYERSCOPE_KERNELS_HPP_
#define LAYERSCOPE_KERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "layerscope/tensor.hpp"

namespace layerscope::kernels {

enum class Mode { kTrain, kEval };

// --- conv2d -----------------------------------------------------------------
// input [N,C,H,W], kernels [F,C,K,K], bias [F] -> [N,F,H',W'] with
// H' = (H + 2*pad - K) / stride + 1.

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      std::size_t stride, std::size_t pad);

struct Conv2dGrads {
  Tensor input;  // empty when not requested
  Tensor kernels;  // empty when not requested
  Tensor bias;
};

// Parameter gradients are skipped (left empty) when `need_param_grads` is false.
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                            std::size_t stride, std::size_t pad, bool need_input_grad = true,
                            bool need_param_grads = true);

// --- maxpool2d --------------------------------------------------------------

struct MaxPoolResult {
  Tensor output;
  // Flat input index of the selected element for every output element.
  std::vector<std::size_t> argmax;
};

// Floor semantics on extents not divisible by the stride. Ties go to the
// first maximum in row-major window order.
MaxPoolResult maxpool2d_forward(const Tensor& input, std::size_t size = 2, std::size_t stride = 2);

Tensor maxpool2d_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                          const Tensor& grad_out);

// --- fully connected --------------------------------------------------------
// input [N, ...] is read as [N,D] with D the product of trailing dims.

Tensor fully_connected_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct FullyConnectedGrads {
  Tensor input;  // shaped like the forward input; empty when not requested
  Tensor weights;
  Tensor bias;
};

FullyConnectedGrads fully_connected_backward(const Tensor& input, const Tensor& weights,
                                             const Tensor& grad_out, bool need_input_grad = true,
                                             bool need_param_grads = true);

// --- relu -------------------------------------------------------------------

Tensor relu_forward(const Tensor& input);
// Subgradient at 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// --- dropout ----------------------------------------------------------------

struct DropoutResult {
  Tensor output;
  // Per-element multiplier: 0 for dropped, 1/(1-rate) for kept. Empty in eval
  // mode or with rate 0.
  Tensor mask;
};

// Inverted dropout. Throws std::invalid_argument unless 0 <= rate < 1.
DropoutResult dropout_forward(const Tensor& input, double rate, Mode mode, std::mt19937_64& rng);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask);

// --- softmax cross-entropy --------------------------------------------------

struct SoftmaxCrossEntropy {
  double loss = 0.0;           // mean over the batch
  Tensor probs;                // [N,K]
  std::vector<double> losses;  // per example
};

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
// (probs - onehot(labels)) / N
Tensor softmax_cross_entropy_backward(const Tensor& probs, std::span<const int> labels);

}  // namespace layerscope::kernels

#endif  // LAYERSCOPE_KERNELS_HPP_
