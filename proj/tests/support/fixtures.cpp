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

#include "fixtures.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace layerscope::testing {
namespace fs = std::filesystem;

TempDir::TempDir(const std::string& prefix) {
  std::string pattern = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
  if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_bytes(const fs::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Bytes read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Bytes golden_idx_images() {
  Bytes b = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3};
  for (const auto& image : kGoldenPixels) b.insert(b.end(), std::begin(image), std::end(image));
  return b;
}

Bytes golden_idx_labels() {
  return {0, 0, 8, 1, 0, 0, 0, 2, static_cast<unsigned char>(kGoldenLabels[0]),
          static_cast<unsigned char>(kGoldenLabels[1])};
}

Bytes cifar_record(unsigned char label, unsigned char plane_seed) {
  Bytes b(kCifarRecordBytes);
  b[0] = label;
  for (std::size_t i = 1; i < b.size(); ++i) {
    b[i] = static_cast<unsigned char>(((i - 1) * 7 + plane_seed) % 256);
  }
  return b;
}

std::vector<MalformedFixture> malformed_idx_fixtures() {
  using Kind = LoadError::Kind;
  const Bytes images = golden_idx_images();
  const Bytes labels = golden_idx_labels();
  std::vector<MalformedFixture> out;

  Bytes magic = images;
  magic[3] = 0x01;
  out.push_back({"bad_magic", magic, labels, Kind::kBadMagic});

  Bytes truncated(images.begin(), images.end() - 4);
  out.push_back({"truncation", truncated, labels, Kind::kTruncated});

  Bytes count = labels;
  count[7] = 3;
  count.push_back(1);
  out.push_back({"count_mismatch", images, count, Kind::kCountMismatch});

  Bytes trailing = images;
  trailing.push_back(0);
  out.push_back({"bad_record_length", trailing, labels, Kind::kBadRecordLength});

  Bytes label = labels;
  label[9] = 10;
  out.push_back({"label_out_of_range", images, label, Kind::kLabelOutOfRange});
  return out;
}

std::vector<MalformedFixture> malformed_cifar_fixtures() {
  using Kind = LoadError::Kind;
  std::vector<MalformedFixture> out;
  Bytes partial = cifar_record(3, 1);
  const Bytes second = cifar_record(4, 2);
  partial.insert(partial.end(), second.begin(), second.begin() + 100);
  out.push_back({"bad_record_length", partial, {}, Kind::kBadRecordLength});
  out.push_back({"label_out_of_range", cifar_record(10, 0), {}, Kind::kLabelOutOfRange});
  out.push_back({"truncation", {}, {}, Kind::kTruncated});
  return out;
}

SyntheticSpec small_blobs_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_classes = 4;
  spec.per_class = 64;
  spec.image_shape = {1, 8, 8};
  spec.margin = 1.5;
  spec.noise_sigma = 0.1;
  spec.seed = seed;
  return spec;
}

}  // namespace layerscope::testing
