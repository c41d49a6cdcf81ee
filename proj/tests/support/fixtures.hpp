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

#ifndef LAYERSCOPE_TESTS_FIXTURES_HPP_
#define LAYERSCOPE_TESTS_FIXTURES_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "layerscope/dataset.hpp"
#include "layerscope/errors.hpp"

namespace layerscope::testing {

using Bytes = std::vector<unsigned char>;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "layerscope");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_bytes(const std::filesystem::path& path, const Bytes& bytes);
Bytes read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Two 2x3 images with labels 7 and 0.
Bytes golden_idx_images();
Bytes golden_idx_labels();
inline constexpr unsigned char kGoldenPixels[2][6] = {{0, 1, 128, 254, 255, 17},
                                                      {200, 3, 0, 99, 64, 255}};
inline constexpr int kGoldenLabels[2] = {7, 0};

// One CIFAR-10 record: label, then R, G and B planes with byte i of the
// record body equal to (i * 7 + plane_seed) mod 256.
Bytes cifar_record(unsigned char label, unsigned char plane_seed);

struct MalformedFixture {
  std::string name;
  Bytes images;  // IDX image file, or a CIFAR batch
  Bytes labels;  // IDX label file; empty for CIFAR
  LoadError::Kind expected;
};

// Bad magic, truncation, count mismatch, trailing bytes and an out-of-range
// label, each derived from the golden pair.
std::vector<MalformedFixture> malformed_idx_fixtures();
// Partial record, out-of-range label and an empty batch.
std::vector<MalformedFixture> malformed_cifar_fixtures();

// Small well-separated blobs for fast training tests.
SyntheticSpec small_blobs_spec(std::uint64_t seed = 7);

}  // namespace layerscope::testing

#endif  // LAYERSCOPE_TESTS_FIXTURES_HPP_
