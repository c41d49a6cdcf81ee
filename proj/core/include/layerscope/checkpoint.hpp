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


#ifndef LAYERSCOPE_CHECKPOINT_HPP_
#define LAYERSCOPE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "layerscope/model.hpp"

namespace layerscope {

inline constexpr char kCheckpointMagic[4] = {'L', 'S', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian):
//   "LSCK" u32:version str:arch u32:rank u64[rank]:input_shape u64:seed
//   u32:tensor_count, then per tensor u32:rank u64[rank]:dims f64[]:data
// Tensors appear as (weights, bias) per parameterized layer in stack order.
std::vector<std::uint8_t> encode_checkpoint(const Model& model);

// Throws LoadError (kBadMagic, kTruncated, kBadRecordLength, kCountMismatch)
// on malformed input and ParseError on a bad arch string.
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace layerscope

#endif  // LAYERSCOPE_CHECKPOINT_HPP_
