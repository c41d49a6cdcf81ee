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

#include "layerscope/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

std::size_t conv_pad(const LayerSpec& spec) { return spec.kernel / 2; }

}  // namespace

Model::Model(std::vector<LayerSpec> specs, Shape input_shape, std::uint64_t seed,
             std::size_t position_offset)
    : specs_(std::move(specs)),
      input_shape_(std::move(input_shape)),
      seed_(seed),
      position_offset_(position_offset) {
  if (specs_.empty()) throw ShapeError("model needs at least one layer");
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].softmax_head != (i + 1 == specs_.size())) {
      throw ShapeError("softmax head must appear exactly once, as the last layer");
    }
  }

  Shape current = input_shape_;
  for (std::size_t pos = 0; pos < specs_.size(); ++pos) {
    const LayerSpec& spec = specs_[pos];
    in_shapes_.push_back(current);
    const std::string where = "layer " + std::to_string(pos + 1) + " (" + spec.token() + ")";
    switch (spec.kind) {
      case LayerKind::kConv: {
        if (current.size() != 3) {
          throw ShapeError(where + " needs a [C,H,W] input, got " + shape_string(current));
        }
        const std::size_t pad = conv_pad(spec);
        const std::size_t h = kernels::conv_output_extent(current[1], spec.kernel, 1, pad);
        const std::size_t w = kernels::conv_output_extent(current[2], spec.kernel, 1, pad);
        param_positions_.push_back(pos);
        params_.push_back({ParamTensor(Tensor({spec.size, current[0], spec.kernel, spec.kernel})),
                           ParamTensor(Tensor({spec.size}))});
        current = {spec.size, h, w};
        break;
      }
      case LayerKind::kMaxPool:
        if (current.size() != 3 || current[1] < 2 || current[2] < 2) {
          throw ShapeError(where + ": spatial size collapses to 0 (input " +
                           shape_string(current) + ")");
        }
        current = {current[0], current[1] / 2, current[2] / 2};
        break;
      case LayerKind::kDropout:
        break;
      case LayerKind::kFullyConnected: {
        const std::size_t fan_in = shape_size(current);
        param_positions_.push_back(pos);
        params_.push_back(
            {ParamTensor(Tensor({fan_in, spec.size})), ParamTensor(Tensor({spec.size}))});
        current = {spec.size};
        break;
      }
    }
    out_shapes_.push_back(current);
  }
}

std::optional<std::size_t> Model::param_index(std::size_t position) const {
  const auto it = std::find(param_positions_.begin(), param_positions_.end(), position);
  if (it == param_positions_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - param_positions_.begin());
}

std::vector<bool> Model::freeze_mask() const {
  std::vector<bool> mask;
  for (const LayerParams& p : params_) mask.push_back(p.weights.frozen);
  return mask;
}

void Model::set_freeze_mask(const std::vector<bool>& mask) {
  if (mask.size() != params_.size()) {
    throw std::invalid_argument("freeze mask has " + std::to_string(mask.size()) +
                                " entries, model has " + std::to_string(params_.size()) +
                                " parameterized layers");
  }
  for (std::size_t i = 0; i < mask.size(); ++i) {
    params_[i].weights.frozen = mask[i];
    params_[i].bias.frozen = mask[i];
  }
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const LayerParams& p : params_) total += p.weights.value.size() + p.bias.value.size();
  return total;
}

Model Model::suffix(std::size_t cut) const {
  if (cut >= specs_.size()) throw std::out_of_range("suffix cut past the last layer");
  Model out(std::vector<LayerSpec>(specs_.begin() + static_cast<std::ptrdiff_t>(cut), specs_.end()),
            in_shapes_[cut], seed_, position_offset_ + cut);
  for (std::size_t i = 0; i < out.num_param_layers(); ++i) {
    const std::size_t source = *param_index(out.param_position(i) + cut);
    out.params_[i] = params_[source];
  }
  return out;
}

Model init_model(std::vector<LayerSpec> specs, Shape input_shape, std::uint64_t seed) {
  Model model(std::move(specs), std::move(input_shape), seed);
  std::seed_seq seq{lo(seed), hi(seed), 0x1417u};
  std::mt19937_64 rng(seq);
  for (std::size_t i = 0; i < model.num_param_layers(); ++i) {
    Tensor& w = model.params(i).weights.value;
    const std::size_t fan_in =
        w.rank() == 4 ? w.dim(1) * w.dim(2) * w.dim(3) : w.dim(0);
    // The head is drawn 10x narrower so an untrained model starts near the
    // uniform prediction instead of with large random logits.
    const bool head = model.specs()[model.param_position(i)].softmax_head;
    const double scale = head ? kHeadInitScale : 1.0;
    std::normal_distribution<double> dist(
        0.0, scale * std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& v : w.data()) v = dist(rng);
  }
  return model;
}

bool bitwise_equal(const Model& a, const Model& b) {
  if (a.specs() != b.specs() || a.input_shape() != b.input_shape() ||
      a.num_param_layers() != b.num_param_layers()) {
    return false;
  }
  for (std::size_t i = 0; i < a.num_param_layers(); ++i) {
    if (!bitwise_equal(a.params(i).weights.value, b.params(i).weights.value) ||
        !bitwise_equal(a.params(i).bias.value, b.params(i).bias.value)) {
      return false;
    }
  }
  return true;
}

double max_param_diff(const Model& a, const Model& b) {
  if (a.num_param_layers() != b.num_param_layers()) {
    throw ShapeError("max_param_diff: models differ in parameterized layers");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.num_param_layers(); ++i) {
    worst = std::max(worst, max_abs_diff(a.params(i).weights.value, b.params(i).weights.value));
    worst = std::max(worst, max_abs_diff(a.params(i).bias.value, b.params(i).bias.value));
  }
  return worst;
}

std::mt19937_64 dropout_stream(const StepKey& key, std::size_t absolute_position) {
  std::seed_seq seq{lo(key.seed),  hi(key.seed),  lo(key.epoch),
                    hi(key.epoch), lo(key.batch), hi(key.batch),
                    lo(absolute_position), 0xd0u};
  return std::mt19937_64(seq);
}

Tensor forward(const Model& model, const Tensor& input, Mode mode, const StepKey& key,
               ForwardTrace* trace, std::size_t begin, std::size_t end) {
  end = std::min(end, model.num_layers());
  if (begin > end) throw std::out_of_range("forward: begin after end");
  if (begin == end) return input;

  Shape expected{input.dim(0)};
  const Shape& sample = model.layer_input_shape(begin);
  expected.insert(expected.end(), sample.begin(), sample.end());
  if (input.shape() != expected) {
    throw ShapeError("forward: input " + shape_string(input.shape()) + " does not match " +
                     shape_string(expected));
  }
  if (trace != nullptr) {
    trace->begin = begin;
    trace->layers.assign(end - begin, LayerTrace{});
  }

  Tensor x = input;
  for (std::size_t pos = begin; pos < end; ++pos) {
    const LayerSpec& spec = model.specs()[pos];
    LayerTrace* lt = trace != nullptr ? &trace->layers[pos - begin] : nullptr;
    if (lt != nullptr) lt->input_shape = x.shape();
    switch (spec.kind) {
      case LayerKind::kConv: {
        const LayerParams& p = model.params(*model.param_index(pos));
        Tensor y = kernels::relu_forward(
            kernels::conv2d_forward(x, p.weights.value, p.bias.value, 1, conv_pad(spec)));
        if (lt != nullptr) {
          lt->input = std::move(x);
          lt->output = y;
        }
        x = std::move(y);
        break;
      }
      case LayerKind::kFullyConnected: {
        const LayerParams& p = model.params(*model.param_index(pos));
        Tensor y = kernels::fully_connected_forward(x, p.weights.value, p.bias.value);
        if (!spec.softmax_head) y = kernels::relu_forward(y);
        if (lt != nullptr) {
          lt->input = std::move(x);
          if (!spec.softmax_head) lt->output = y;
        }
        x = std::move(y);
        break;
      }
      case LayerKind::kMaxPool: {
        kernels::MaxPoolResult r = kernels::maxpool2d_forward(x, 2, 2);
        if (lt != nullptr) lt->argmax = std::move(r.argmax);
        x = std::move(r.output);
        break;
      }
      case LayerKind::kDropout: {
        std::mt19937_64 rng = dropout_stream(key, model.position_offset() + pos);
        kernels::DropoutResult r = kernels::dropout_forward(x, spec.rate, mode, rng);
        if (lt != nullptr) lt->mask = std::move(r.mask);
        x = std::move(r.output);
        break;
      }
    }
  }
  return x;
}

Tensor backward(Model& model, const ForwardTrace& trace, Tensor grad_out, std::size_t stop,
                bool want_input_grad) {
  const std::size_t end = trace.begin + trace.layers.size();
  if (stop < trace.begin || stop > end) throw std::out_of_range("backward: stop outside trace");

  Tensor g = std::move(grad_out);
  for (std::size_t pos = end; pos-- > stop;) {
    const LayerSpec& spec = model.specs()[pos];
    const LayerTrace& lt = trace.layers[pos - trace.begin];
    const bool need_input = pos > stop || want_input_grad;
    switch (spec.kind) {
      case LayerKind::kConv: {
        LayerParams& p = model.params(*model.param_index(pos));
        const bool need_params = !p.weights.frozen;
        g = kernels::relu_backward(lt.output, g);
        kernels::Conv2dGrads r = kernels::conv2d_backward(lt.input, p.weights.value, g, 1,
                                                          conv_pad(spec), need_input, need_params);
        if (need_params) {
          p.weights.grad = std::move(r.kernels);
          p.bias.grad = std::move(r.bias);
        }
        g = std::move(r.input);
        break;
      }
      case LayerKind::kFullyConnected: {
        LayerParams& p = model.params(*model.param_index(pos));
        const bool need_params = !p.weights.frozen;
        if (!spec.softmax_head) g = kernels::relu_backward(lt.output, g);
        kernels::FullyConnectedGrads r =
            kernels::fully_connected_backward(lt.input, p.weights.value, g, need_input, need_params);
        if (need_params) {
          p.weights.grad = std::move(r.weights);
          p.bias.grad = std::move(r.bias);
        }
        g = std::move(r.input);
        break;
      }
      case LayerKind::kMaxPool:
        if (need_input) g = kernels::maxpool2d_backward(lt.input_shape, lt.argmax, g);
        break;
      case LayerKind::kDropout:
        g = kernels::dropout_backward(g, lt.mask);
        break;
    }
    if (!need_input) return Tensor();
  }
  return want_input_grad ? g : Tensor();
}

SgdMomentum::SgdMomentum(const Model& model, double learning_rate, double momentum)
    : learning_rate_(learning_rate), momentum_(momentum) {
  for (std::size_t i = 0; i < model.num_param_layers(); ++i) {
    const LayerParams& p = model.params(i);
    velocity_.push_back({Tensor(p.weights.value.shape()), Tensor(p.bias.value.shape())});
  }
}

void SgdMomentum::step(Model& model, std::size_t first, std::size_t last) {
  last = std::min(last, model.num_param_layers());
  auto update = [this](ParamTensor& param, Tensor& velocity) {
    double* w = param.value.raw();
    const double* g = param.grad.raw();
    double* v = velocity.raw();
    for (std::size_t i = 0; i < velocity.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      w[i] -= learning_rate_ * v[i];
    }
  };
  for (std::size_t i = first; i < last; ++i) {
    LayerParams& p = model.params(i);
    if (p.weights.frozen) continue;
    update(p.weights, velocity_[i].weights);
    update(p.bias, velocity_[i].bias);
  }
}

}  // namespace layerscope
