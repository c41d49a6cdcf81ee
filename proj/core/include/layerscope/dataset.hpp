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

#ifndef LAYERSCOPE_DATASET_HPP_
#define LAYERSCOPE_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layerscope/tensor.hpp"

namespace layerscope {

// Labelled images, [K,C,H,W] with values in [0,1]. Also used for cached
// intermediate activations, in which case `images` holds layer inputs.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::string name;
  std::size_t num_classes = 10;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  std::size_t sample_size() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  // Stacks the given samples into a [n, ...] batch.
  Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
  // First `count` samples.
  Dataset head(std::size_t count) const;
};

// a followed by b, in index order.
Dataset concat(const Dataset& a, const Dataset& b);

// --- file formats -----------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

// MNIST / Fashion-MNIST IDX pair. Throws LoadError.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);
// CIFAR-10 binary batches, concatenated in argument order. Throws LoadError.
Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths);

// Writes a single-channel dataset as an IDX pair. Every pixel must be an
// exact multiple of 1/255.
void export_idx(const Dataset& data, const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path);

// --- private split ----------------------------------------------------------

// S gets floor(K/2) uniformly chosen samples, T the rest.
struct PrivateSplit {
  Dataset private_set;      // S
  Dataset non_private_set;  // T
  std::uint64_t seed = 0;
  std::vector<std::size_t> private_indices;
  std::vector<std::size_t> non_private_indices;

  // X = S followed by T.
  Dataset combined() const { return concat(private_set, non_private_set); }
};

PrivateSplit split_private(const Dataset& data, std::uint64_t seed);

// --- synthetic data ---------------------------------------------------------

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t per_class = 250;
  Shape image_shape{1, 8, 8};
  // Minimum pairwise L2 distance between class-mean images.
  double margin = 1.0;
  std::uint64_t seed = 7;
  // Per-pixel Gaussian noise standard deviation.
  double noise_sigma = 0.1;
};

// Class-conditional Gaussian blobs rendered as images, quantized to k/255 so
// the result can be exported losslessly. Labels cycle 0,1,...,C-1.
Dataset gen_synthetic(const SyntheticSpec& spec);

// Noise-free class-mean images the generator draws around, [C, ...].
Tensor synthetic_class_means(const SyntheticSpec& spec);

// --- descriptors ------------------------------------------------------------

// JSON dataset descriptor as consumed by the command-line tool.
struct DatasetDescriptor {
  std::string name;
  std::string format;  // "idx", "cifar10" or "synthetic"
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::vector<std::filesystem::path> train_batches, test_batches;
  std::optional<SyntheticSpec> synthetic;
  std::size_t test_per_class = 0;  // synthetic only
  std::size_t limit = 0;           // 0 = all training samples
};

DatasetDescriptor load_descriptor(const std::filesystem::path& path);
std::string descriptor_json(const DatasetDescriptor& descriptor);

struct LoadedData {
  Dataset train;
  std::optional<Dataset> test;
};

LoadedData load_dataset(const DatasetDescriptor& descriptor);

}  // namespace layerscope

#endif  // LAYERSCOPE_DATASET_HPP_
