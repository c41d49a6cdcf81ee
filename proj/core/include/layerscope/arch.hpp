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

#ifndef LAYERSCOPE_ARCH_HPP_
#define LAYERSCOPE_ARCH_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace layerscope {

enum class LayerKind { kConv, kMaxPool, kFullyConnected, kDropout };

// One entry of a layer stack. Conv and non-head FullyConnected layers carry
// an implicit ReLU; the softmax head is a FullyConnected layer with
// `softmax_head` set and no ReLU.
struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  std::size_t size = 0;    // filters (Conv) or units (FullyConnected)
  std::size_t kernel = 3;  // Conv only; padding is kernel / 2, stride 1
  double rate = 0.0;       // Dropout only
  bool softmax_head = false;

  bool has_params() const {
    return kind == LayerKind::kConv || kind == LayerKind::kFullyConnected;
  }
  // Token in the architecture grammar, e.g. "16C3", "MP", "D50", "10SM".
  std::string token() const;
  // Short label used in partition reports: C, MP, D, FC, SM.
  std::string label() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// VGG-7 as used in the exposure experiments.
inline constexpr std::string_view kVgg7Arch =
    "16C3-16C3-MP-32C3-32C3-MP-32C3-32C3-MP-64FC-10SM";

// Grammar: tokens joined by '-', each one of `<n>C<k>`, `MP`, `<n>FC`,
// `<n>SM`, `D<percent>`. The SM token must appear exactly once, last.
// Throws ParseError naming the offending token position.
std::vector<LayerSpec> parse_arch(std::string_view arch);
std::string format_arch(std::span<const LayerSpec> specs);

// Inserts Dropout(rate) immediately before the first FullyConnected layer
// when the stack has no dropout yet and rate > 0.
std::vector<LayerSpec> with_dropout_before_fc(std::vector<LayerSpec> specs, double rate);

std::size_t count_param_layers(std::span<const LayerSpec> specs);

}  // namespace layerscope

#endif  // LAYERSCOPE_ARCH_HPP_
