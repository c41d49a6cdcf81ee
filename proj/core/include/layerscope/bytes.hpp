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


#ifndef LAYERSCOPE_BYTES_HPP_
#define LAYERSCOPE_BYTES_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace layerscope {

// Little-endian binary encoder shared by checkpoints and the worker protocol.
// Doubles are written as their IEEE-754 bit patterns, so round trips are exact.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v);
  void f64s(std::span<const double> values);
  void bytes(std::span<const std::uint8_t> data);
  // u32 length followed by the characters.
  void str(std::string_view s);

  const std::vector<std::uint8_t>& buffer() const { return buffer_; }
  std::vector<std::uint8_t> take() { return std::move(buffer_); }
  std::size_t size() const { return buffer_.size(); }

 private:
  std::vector<std::uint8_t> buffer_;
};

// Decoder over a borrowed buffer. A read past the end throws
// std::out_of_range; callers translate that into their own error type.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64();
  void f64s(std::span<double> out);
  std::span<const std::uint8_t> bytes(std::size_t n) { return {take(n), n}; }
  std::string str();

  std::size_t remaining() const { return data_.size() - offset_; }
  std::size_t offset() const { return offset_; }

 private:
  const std::uint8_t* take(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::size_t offset_ = 0;
};

}  // namespace layerscope

#endif  // LAYERSCOPE_BYTES_HPP_
