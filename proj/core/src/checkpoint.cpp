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


#include "layerscope/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "layerscope/bytes.hpp"
#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

using Kind = LoadError::Kind;

void write_tensor(ByteWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u64(d);
  w.f64s(t.data());
}

Shape read_shape(ByteReader& r) {
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw LoadError(Kind::kBadRecordLength, "checkpoint: implausible rank");
  Shape shape(rank);
  for (auto& d : shape) d = r.u64();
  return shape;
}

void read_tensor_into(ByteReader& r, Tensor& target, std::size_t index) {
  const Shape shape = read_shape(r);
  if (shape != target.shape()) {
    throw LoadError(Kind::kCountMismatch, "checkpoint: tensor " + std::to_string(index) +
                                              " has shape " + shape_string(shape) +
                                              ", architecture expects " +
                                              shape_string(target.shape()));
  }
  r.f64s(target.data());
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
  ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(kCheckpointMagic), 4});
  w.u32(kCheckpointVersion);
  w.str(model.arch());
  w.u32(static_cast<std::uint32_t>(model.input_shape().size()));
  for (std::size_t d : model.input_shape()) w.u64(d);
  w.u64(model.seed());
  w.u32(static_cast<std::uint32_t>(2 * model.num_param_layers()));
  for (std::size_t i = 0; i < model.num_param_layers(); ++i) {
    write_tensor(w, model.params(i).weights.value);
    write_tensor(w, model.params(i).bias.value);
  }
  return w.take();
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4,
                                      reinterpret_cast<const std::uint8_t*>(kCheckpointMagic))) {
    throw LoadError(Kind::kBadMagic, "checkpoint: bad magic");
  }
  ByteReader r(bytes.subspan(4));
  try {
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
      throw LoadError(Kind::kBadMagic,
                      "checkpoint: unsupported version " + std::to_string(version));
    }
    const std::string arch = r.str();
    const Shape input_shape = read_shape(r);
    const std::uint64_t seed = r.u64();
    Model model(parse_arch(arch), input_shape, seed);
    const std::uint32_t count = r.u32();
    if (count != 2 * model.num_param_layers()) {
      throw LoadError(Kind::kCountMismatch,
                      "checkpoint: " + std::to_string(count) + " tensors, architecture needs " +
                          std::to_string(2 * model.num_param_layers()));
    }
    for (std::size_t i = 0; i < model.num_param_layers(); ++i) {
      read_tensor_into(r, model.params(i).weights.value, 2 * i);
      read_tensor_into(r, model.params(i).bias.value, 2 * i + 1);
    }
    if (r.remaining() != 0) {
      throw LoadError(Kind::kBadRecordLength,
                      "checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
    }
    return model;
  } catch (const std::out_of_range& e) {
    throw LoadError(Kind::kTruncated, std::string("checkpoint: truncated, ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(Kind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError(Kind::kIo, "write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(Kind::kIo, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

}  // namespace layerscope
