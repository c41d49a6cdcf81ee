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

#include "layerscope/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "layerscope/errors.hpp"

namespace layerscope::kernels {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t filters, kernel;
  std::size_t stride, pad;
  std::size_t out_height, out_width;

  std::size_t patch() const { return channels * kernel * kernel; }
  std::size_t positions() const { return out_height * out_width; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels, std::size_t stride,
                           std::size_t pad) {
  if (input.rank() != 4) {
    throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_string(input.shape()));
  }
  if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3)) {
    throw ShapeError("conv2d: kernels must be [F,C,K,K], got " + shape_string(kernels.shape()));
  }
  if (kernels.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(1)) +
                     " channels, kernels expect " + std::to_string(kernels.dim(1)));
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), kernels.dim(0), kernels.dim(2),
                 stride, pad, 0, 0};
  if (g.height + 2 * pad < g.kernel || g.width + 2 * pad < g.kernel) {
    throw ShapeError("conv2d: padded input " + shape_string(input.shape()) +
                     " is smaller than the kernel");
  }
  g.out_height = conv_output_extent(g.height, g.kernel, stride, pad);
  g.out_width = conv_output_extent(g.width, g.kernel, stride, pad);
  return g;
}

// cols[(c*K + ki)*K + kj, oh*W' + ow] = padded input value under that tap.
void im2col(const double* image, const ConvGeometry& g, double* cols) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        double* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * positions;
        for (std::size_t oh = 0; oh < g.out_height; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          double* out = row + oh * g.out_width;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(out, out + g.out_width, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(ih) * g.width;
          for (std::size_t ow = 0; ow < g.out_width; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            out[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width))
                          ? 0.0
                          : src[static_cast<std::size_t>(iw)];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* image) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const double* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * positions;
        for (std::size_t oh = 0; oh < g.out_height; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          double* dst = plane + static_cast<std::size_t>(ih) * g.width;
          const double* src = row + oh * g.out_width;
          for (std::size_t ow = 0; ow < g.out_width; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.width)) {
              dst[static_cast<std::size_t>(iw)] += src[ow];
            }
          }
        }
      }
    }
  }
}

std::size_t flat_features(const Tensor& input) { return input.size() / input.dim(0); }

}  // namespace

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  return (extent + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(input, kernels, stride, pad);
  if (bias.size() != g.filters) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.size()) + " entries, expected " +
                     std::to_string(g.filters));
  }
  const std::size_t batch = input.dim(0);
  Tensor output({batch, g.filters, g.out_height, g.out_width});
  RowMatrix cols(g.patch(), g.positions());
  ConstMatrixMap weights(kernels.raw(), g.filters, g.patch());
  const std::size_t in_stride = g.channels * g.height * g.width;
  const std::size_t out_stride = g.filters * g.positions();

  for (std::size_t n = 0; n < batch; ++n) {
    im2col(input.raw() + n * in_stride, g, cols.data());
    MatrixMap out(output.raw() + n * out_stride, g.filters, g.positions());
    out.noalias() = weights * cols;
    for (std::size_t f = 0; f < g.filters; ++f) out.row(f).array() += bias[f];
  }
  return output;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                            std::size_t stride, std::size_t pad, bool need_input_grad,
                            bool need_param_grads) {
  const ConvGeometry g = conv_geometry(input, kernels, stride, pad);
  const std::size_t batch = input.dim(0);
  const Shape expected{batch, g.filters, g.out_height, g.out_width};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d backward: grad_out " + shape_string(grad_out.shape()) +
                     ", expected " + shape_string(expected));
  }

  Conv2dGrads grads;
  if (!need_input_grad && !need_param_grads) return grads;
  if (need_param_grads) {
    grads.kernels = Tensor(kernels.shape());
    grads.bias = Tensor({g.filters});
  }
  if (need_input_grad) grads.input = Tensor(input.shape());

  RowMatrix cols(g.patch(), g.positions());
  RowMatrix dcols;
  if (need_input_grad) dcols.resize(g.patch(), g.positions());
  ConstMatrixMap weights(kernels.raw(), g.filters, g.patch());
  MatrixMap dweights(need_param_grads ? grads.kernels.raw() : nullptr, g.filters, g.patch());
  const std::size_t in_stride = g.channels * g.height * g.width;
  const std::size_t out_stride = g.filters * g.positions();

  for (std::size_t n = 0; n < batch; ++n) {
    ConstMatrixMap dout(grad_out.raw() + n * out_stride, g.filters, g.positions());
    if (need_param_grads) {
      im2col(input.raw() + n * in_stride, g, cols.data());
      dweights.noalias() += dout * cols.transpose();
      for (std::size_t f = 0; f < g.filters; ++f) {
        const double* row = grad_out.raw() + n * out_stride + f * g.positions();
        double acc = 0.0;
        for (std::size_t p = 0; p < g.positions(); ++p) acc += row[p];
        grads.bias[f] += acc;
      }
    }
    if (need_input_grad) {
      dcols.noalias() = weights.transpose() * dout;
      col2im_add(dcols.data(), g, grads.input.raw() + n * in_stride);
    }
  }
  return grads;
}

MaxPoolResult maxpool2d_forward(const Tensor& input, std::size_t size, std::size_t stride) {
  if (input.rank() != 4) {
    throw ShapeError("maxpool2d: input must be [N,C,H,W], got " + shape_string(input.shape()));
  }
  if (size == 0 || stride == 0) throw ShapeError("maxpool2d: window and stride must be >= 1");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  if (height < size || width < size) {
    throw ShapeError("maxpool2d: input " + shape_string(input.shape()) +
                     " smaller than window " + std::to_string(size));
  }
  const std::size_t out_h = (height - size) / stride + 1;
  const std::size_t out_w = (width - size) / stride + 1;

  MaxPoolResult result{Tensor({batch, channels, out_h, out_w}), {}};
  result.argmax.resize(result.output.size());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < batch * channels; ++plane) {
    const std::size_t base = plane * height * width;
    for (std::size_t oh = 0; oh < out_h; ++oh) {
      for (std::size_t ow = 0; ow < out_w; ++ow, ++o) {
        std::size_t best = base + oh * stride * width + ow * stride;
        for (std::size_t i = 0; i < size; ++i) {
          for (std::size_t j = 0; j < size; ++j) {
            const std::size_t idx = base + (oh * stride + i) * width + ow * stride + j;
            // The first NaN in a window wins so it is not silently dropped.
            if (input[idx] > input[best] || (std::isnan(input[idx]) && !std::isnan(input[best]))) {
              best = idx;
            }
          }
        }
        result.output[o] = input[best];
        result.argmax[o] = best;
      }
    }
  }
  return result;
}

Tensor maxpool2d_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                          const Tensor& grad_out) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool2d backward: argmax/grad_out size mismatch");
  }
  Tensor grad_in(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad_in[argmax[o]] += grad_out[o];
  return grad_in;
}

Tensor fully_connected_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (input.rank() < 2) throw ShapeError("fully_connected: input must be [N,D]");
  if (weights.rank() != 2) throw ShapeError("fully_connected: weights must be [D,U]");
  const std::size_t batch = input.dim(0), in_dim = flat_features(input);
  const std::size_t units = weights.dim(1);
  if (weights.dim(0) != in_dim) {
    throw ShapeError("fully_connected: input has " + std::to_string(in_dim) +
                     " features, weights expect " + std::to_string(weights.dim(0)));
  }
  if (bias.size() != units) throw ShapeError("fully_connected: bias size mismatch");

  Tensor output({batch, units});
  for (std::size_t n = 0; n < batch; ++n) {
    double* out = output.raw() + n * units;
    std::copy(bias.raw(), bias.raw() + units, out);
    const double* x = input.raw() + n * in_dim;
    for (std::size_t d = 0; d < in_dim; ++d) {
      const double xd = x[d];
      const double* w = weights.raw() + d * units;
      for (std::size_t u = 0; u < units; ++u) out[u] += xd * w[u];
    }
  }
  return output;
}

FullyConnectedGrads fully_connected_backward(const Tensor& input, const Tensor& weights,
                                             const Tensor& grad_out, bool need_input_grad,
                                             bool need_param_grads) {
  const std::size_t batch = input.dim(0), in_dim = flat_features(input);
  const std::size_t units = weights.dim(1);
  if (weights.dim(0) != in_dim || grad_out.shape() != Shape{batch, units}) {
    throw ShapeError("fully_connected backward: shape mismatch");
  }
  FullyConnectedGrads grads;
  if (need_param_grads) {
    grads.weights = Tensor(weights.shape());
    grads.bias = Tensor({units});
  }
  for (std::size_t n = 0; need_param_grads && n < batch; ++n) {
    const double* x = input.raw() + n * in_dim;
    const double* g = grad_out.raw() + n * units;
    for (std::size_t d = 0; d < in_dim; ++d) {
      const double xd = x[d];
      double* dw = grads.weights.raw() + d * units;
      for (std::size_t u = 0; u < units; ++u) dw[u] += xd * g[u];
    }
    for (std::size_t u = 0; u < units; ++u) grads.bias[u] += g[u];
  }
  if (need_input_grad) {
    grads.input = Tensor(input.shape());
    for (std::size_t n = 0; n < batch; ++n) {
      const double* g = grad_out.raw() + n * units;
      double* dx = grads.input.raw() + n * in_dim;
      for (std::size_t d = 0; d < in_dim; ++d) {
        const double* w = weights.raw() + d * units;
        double acc = 0.0;
        for (std::size_t u = 0; u < units; ++u) acc += g[u] * w[u];
        dx[d] = acc;
      }
    }
  }
  return grads;
}

// Written as "<= 0 gives 0" so a NaN input stays NaN and reaches the loss.
Tensor relu_forward(const Tensor& input) {
  Tensor output(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) output[i] = input[i] <= 0.0 ? 0.0 : input[i];
  return output;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  if (input.shape() != grad_out.shape()) throw ShapeError("relu backward: shape mismatch");
  Tensor grad_in(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) grad_in[i] = input[i] <= 0.0 ? 0.0 : grad_out[i];
  return grad_in;
}

DropoutResult dropout_forward(const Tensor& input, double rate, Mode mode, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) return {input, Tensor()};

  const double keep_scale = 1.0 / (1.0 - rate);
  DropoutResult result{Tensor(input.shape()), Tensor(input.shape())};
  for (std::size_t i = 0; i < input.size(); ++i) {
    // 53-bit uniform in [0,1); explicit so the mask does not depend on the
    // standard library's distribution implementation.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double m = u < rate ? 0.0 : keep_scale;
    result.mask[i] = m;
    result.output[i] = input[i] * m;
  }
  return result;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
  if (mask.empty()) return grad_out;
  if (mask.shape() != grad_out.shape()) throw ShapeError("dropout backward: mask shape mismatch");
  Tensor grad_in(grad_out.shape());
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[i] = grad_out[i] * mask[i];
  return grad_in;
}

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be [N,K]");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(batch));
  }
  SoftmaxCrossEntropy result{0.0, Tensor(logits.shape()), std::vector<double>(batch)};
  double total = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    const double* z = logits.raw() + n * classes;
    double* p = result.probs.raw() + n * classes;
    const double peak = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      p[k] = std::exp(z[k] - peak);
      sum += p[k];
    }
    for (std::size_t k = 0; k < classes; ++k) p[k] /= sum;
    const double loss = std::log(sum) - (z[label] - peak);
    result.losses[n] = loss;
    total += loss;
  }
  result.loss = total / static_cast<double>(batch);
  return result;
}

Tensor softmax_cross_entropy_backward(const Tensor& probs, std::span<const int> labels) {
  const std::size_t batch = probs.dim(0), classes = probs.dim(1);
  if (labels.size() != batch) throw ShapeError("softmax_cross_entropy backward: label count");
  Tensor grad = probs;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    grad[n * classes + static_cast<std::size_t>(labels[n])] -= 1.0;
    for (std::size_t k = 0; k < classes; ++k) grad[n * classes + k] *= inv_batch;
  }
  return grad;
}

}  // namespace layerscope::kernels
