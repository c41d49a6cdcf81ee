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

#include "layerscope/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <stdexcept>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

using Kind = LoadError::Kind;
namespace fs = std::filesystem;

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(Kind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t value) {
  const char bytes[4] = {static_cast<char>(value >> 24), static_cast<char>(value >> 16),
                         static_cast<char>(value >> 8), static_cast<char>(value)};
  out.write(bytes, 4);
}

void check_length(const std::vector<unsigned char>& bytes, std::size_t expected,
                  const fs::path& path) {
  if (bytes.size() < expected) {
    throw LoadError(Kind::kTruncated, path.string() + ": truncated, expected " +
                                          std::to_string(expected) + " bytes, got " +
                                          std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw LoadError(Kind::kBadRecordLength, path.string() + ": expected " +
                                                std::to_string(expected) + " bytes, got " +
                                                std::to_string(bytes.size()) + " (trailing data)");
  }
}

void check_magic(std::uint32_t magic, std::uint32_t expected, const fs::path& path) {
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "bad magic 0x%08x, expected 0x%08x", magic, expected);
    throw LoadError(Kind::kBadMagic, path.string() + ": " + buf);
  }
}

constexpr std::size_t kNumClasses = 10;

int checked_label(unsigned char raw, std::size_t index, const fs::path& path) {
  if (raw >= kNumClasses) {
    throw LoadError(Kind::kLabelOutOfRange, path.string() + ": label " + std::to_string(raw) +
                                                " at record " + std::to_string(index) +
                                                " outside [0, 10)");
  }
  return raw;
}

}  // namespace

const char* to_string(LoadError::Kind kind) {
  switch (kind) {
    case Kind::kIo:
      return "io";
    case Kind::kBadMagic:
      return "bad_magic";
    case Kind::kTruncated:
      return "truncated";
    case Kind::kCountMismatch:
      return "count_mismatch";
    case Kind::kBadRecordLength:
      return "bad_record_length";
    case Kind::kLabelOutOfRange:
      return "label_out_of_range";
    case Kind::kBadDescriptor:
      return "bad_descriptor";
  }
  return "unknown";
}

Shape Dataset::sample_shape() const {
  return Shape(images.shape().begin() + 1, images.shape().end());
}

std::size_t Dataset::sample_size() const { return images.size() / images.dim(0); }

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  Shape shape = images.shape();
  shape[0] = indices.size();
  Tensor batch(shape);
  const std::size_t stride = sample_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double* src = images.raw() + indices[i] * stride;
    std::copy(src, src + stride, batch.raw() + i * stride);
  }
  return batch;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ShapeError("dataset subset must be nonempty");
  return {gather(indices), gather_labels(indices), name, num_classes};
}

Dataset Dataset::head(std::size_t count) const {
  if (count == 0 || count >= size()) return *this;
  std::vector<std::size_t> indices(count);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  return subset(indices);
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.sample_shape() != b.sample_shape()) {
    throw ShapeError("concat: sample shapes " + shape_string(a.sample_shape()) + " and " +
                     shape_string(b.sample_shape()) + " differ");
  }
  Shape shape = a.images.shape();
  shape[0] = a.size() + b.size();
  std::vector<double> data(a.images.data().begin(), a.images.data().end());
  data.insert(data.end(), b.images.data().begin(), b.images.data().end());
  std::vector<int> labels = a.labels;
  labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  return {Tensor(shape, std::move(data)), std::move(labels), a.name,
          std::max(a.num_classes, b.num_classes)};
}

Dataset load_idx(const fs::path& images_path, const fs::path& labels_path) {
  const auto image_bytes = read_file(images_path);
  if (image_bytes.size() < 16) {
    throw LoadError(Kind::kTruncated, images_path.string() +
                                          ": truncated, expected at least 16 header bytes, got " +
                                          std::to_string(image_bytes.size()));
  }
  check_magic(read_be32(image_bytes, 0), kIdxImageMagic, images_path);
  const std::size_t count = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8);
  const std::size_t cols = read_be32(image_bytes, 12);
  if (count == 0 || rows == 0 || cols == 0) {
    throw LoadError(Kind::kBadRecordLength, images_path.string() + ": zero-sized dimension");
  }
  check_length(image_bytes, 16 + count * rows * cols, images_path);

  const auto label_bytes = read_file(labels_path);
  if (label_bytes.size() < 8) {
    throw LoadError(Kind::kTruncated, labels_path.string() +
                                          ": truncated, expected at least 8 header bytes, got " +
                                          std::to_string(label_bytes.size()));
  }
  check_magic(read_be32(label_bytes, 0), kIdxLabelMagic, labels_path);
  const std::size_t label_count = read_be32(label_bytes, 4);
  if (label_count != count) {
    throw LoadError(Kind::kCountMismatch, "image file has " + std::to_string(count) +
                                              " records but label file has " +
                                              std::to_string(label_count));
  }
  check_length(label_bytes, 8 + count, labels_path);

  Dataset data;
  data.name = images_path.filename().string();
  data.images = Tensor({count, 1, rows, cols});
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    data.images[i] = static_cast<double>(image_bytes[16 + i]) / 255.0;
  }
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    data.labels[i] = checked_label(label_bytes[8 + i], i, labels_path);
  }
  return data;
}

Dataset load_cifar10(std::span<const fs::path> batch_paths) {
  constexpr std::size_t kPixels = kCifarRecordBytes - 1;
  std::vector<double> pixels;
  std::vector<int> labels;
  for (const fs::path& path : batch_paths) {
    const auto bytes = read_file(path);
    if (bytes.size() % kCifarRecordBytes != 0) {
      throw LoadError(Kind::kBadRecordLength,
                      path.string() + ": length " + std::to_string(bytes.size()) +
                          " is not a multiple of " + std::to_string(kCifarRecordBytes));
    }
    const std::size_t records = bytes.size() / kCifarRecordBytes;
    for (std::size_t r = 0; r < records; ++r) {
      const std::size_t base = r * kCifarRecordBytes;
      labels.push_back(checked_label(bytes[base], labels.size(), path));
      for (std::size_t p = 0; p < kPixels; ++p) {
        pixels.push_back(static_cast<double>(bytes[base + 1 + p]) / 255.0);
      }
    }
  }
  if (labels.empty()) throw LoadError(Kind::kTruncated, "CIFAR-10 input contains no records");
  Dataset data;
  data.name = "cifar10";
  data.images = Tensor({labels.size(), 3, 32, 32}, std::move(pixels));
  data.labels = std::move(labels);
  return data;
}

void export_idx(const Dataset& data, const fs::path& images_path, const fs::path& labels_path) {
  if (data.images.rank() != 4 || data.images.dim(1) != 1) {
    throw ShapeError("export_idx needs [K,1,H,W] images, got " +
                     shape_string(data.images.shape()));
  }
  std::string pixels(data.images.size(), '\0');
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const double scaled = data.images[i] * 255.0;
    const double rounded = std::round(scaled);
    if (rounded < 0.0 || rounded > 255.0 || rounded / 255.0 != data.images[i]) {
      throw std::invalid_argument("export_idx: pixel " + std::to_string(i) +
                                  " is not an exact byte value");
    }
    pixels[i] = static_cast<char>(static_cast<unsigned char>(rounded));
  }
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw LoadError(Kind::kIo, "cannot write IDX output");
  write_be32(img, kIdxImageMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(data.images.dim(2)));
  write_be32(img, static_cast<std::uint32_t>(data.images.dim(3)));
  img.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  write_be32(lab, kIdxLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int label : data.labels) lab.put(static_cast<char>(label));
}

PrivateSplit split_private(const Dataset& data, std::uint64_t seed) {
  const std::size_t k = data.size();
  if (k < 2) throw std::invalid_argument("split_private needs at least 2 samples");
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x5b1u};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  PrivateSplit split;
  split.seed = seed;
  split.private_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k / 2));
  split.non_private_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(k / 2), order.end());
  split.private_set = data.subset(split.private_indices);
  split.non_private_set = data.subset(split.non_private_indices);
  return split;
}

Tensor synthetic_class_means(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("synthetic data needs >= 2 classes");
  if (spec.image_shape.size() != 3) {
    throw std::invalid_argument("synthetic image shape must be [C,H,W]");
  }
  const std::size_t channels = spec.image_shape[0];
  const std::size_t height = spec.image_shape[1], width = spec.image_shape[2];
  const auto grid = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(spec.num_classes))));
  const std::size_t cell_h = height / grid, cell_w = width / grid;
  if (cell_h < 2 || cell_w < 2) {
    throw std::invalid_argument("image " + shape_string(spec.image_shape) + " too small for " +
                                std::to_string(spec.num_classes) + " distinct class means");
  }
  const double spread = 0.25 * static_cast<double>(std::min(cell_h, cell_w));
  const std::size_t plane = height * width;

  // Unit-amplitude bump per class, one grid cell each.
  std::vector<double> bumps(spec.num_classes * plane);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const double cy = (static_cast<double>(c / grid) + 0.5) * static_cast<double>(cell_h) - 0.5;
    const double cx = (static_cast<double>(c % grid) + 0.5) * static_cast<double>(cell_w) - 0.5;
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        bumps[c * plane + y * width + x] = std::exp(-(dy * dy + dx * dx) / (2 * spread * spread));
      }
    }
  }
  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < spec.num_classes; ++a) {
    for (std::size_t b = a + 1; b < spec.num_classes; ++b) {
      double sq = 0.0;
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = bumps[a * plane + p] - bumps[b * plane + p];
        sq += d * d;
      }
      min_dist = std::min(min_dist, std::sqrt(sq * static_cast<double>(channels)));
    }
  }
  constexpr double kBase = 0.3;
  const double amplitude = spec.margin / min_dist;
  if (kBase + amplitude > 1.0) {
    throw std::invalid_argument("margin " + std::to_string(spec.margin) +
                                " cannot be placed inside [0,1] pixels for image " +
                                shape_string(spec.image_shape));
  }

  Shape shape{spec.num_classes};
  shape.insert(shape.end(), spec.image_shape.begin(), spec.image_shape.end());
  Tensor means(shape);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t ch = 0; ch < channels; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        means[(c * channels + ch) * plane + p] = kBase + amplitude * bumps[c * plane + p];
      }
    }
  }
  return means;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.per_class == 0) throw std::invalid_argument("synthetic per_class must be >= 1");
  const Tensor means = synthetic_class_means(spec);
  const std::size_t sample = shape_size(spec.image_shape);
  const std::size_t total = spec.num_classes * spec.per_class;

  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                    static_cast<std::uint32_t>(spec.seed >> 32), 0x5e7u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);

  Shape shape{total};
  shape.insert(shape.end(), spec.image_shape.begin(), spec.image_shape.end());
  Dataset data;
  data.name = "synthetic";
  data.num_classes = spec.num_classes;
  data.images = Tensor(shape);
  data.labels.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t label = i % spec.num_classes;
    data.labels[i] = static_cast<int>(label);
    for (std::size_t p = 0; p < sample; ++p) {
      const double v = std::clamp(means[label * sample + p] + noise(rng), 0.0, 1.0);
      data.images[i * sample + p] = std::round(v * 255.0) / 255.0;
    }
  }
  return data;
}

// --- descriptors ------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

DatasetDescriptor load_descriptor(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(Kind::kIo, "cannot open dataset descriptor " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(Kind::kBadDescriptor, path.string() + ": " + e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  DatasetDescriptor d;
  try {
    d.name = j.value("name", std::string("dataset"));
    d.format = j.at("format").get<std::string>();
    d.limit = j.value("limit", std::size_t{0});
    auto opt_path = [&](const char* key, fs::path& out) {
      if (j.contains(key)) out = resolve(base, j.at(key).get<std::string>());
    };
    if (d.format == "idx") {
      d.train_images = resolve(base, j.at("train_images").get<std::string>());
      d.train_labels = resolve(base, j.at("train_labels").get<std::string>());
      opt_path("test_images", d.test_images);
      opt_path("test_labels", d.test_labels);
    } else if (d.format == "cifar10") {
      for (const auto& p : j.at("train_batches")) d.train_batches.push_back(resolve(base, p));
      if (j.contains("test_batches")) {
        for (const auto& p : j.at("test_batches")) d.test_batches.push_back(resolve(base, p));
      }
    } else if (d.format == "synthetic") {
      SyntheticSpec s;
      s.num_classes = j.value("num_classes", s.num_classes);
      s.per_class = j.value("per_class", s.per_class);
      if (j.contains("image_shape")) s.image_shape = j.at("image_shape").get<Shape>();
      s.margin = j.value("margin", s.margin);
      s.seed = j.value("seed", s.seed);
      s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
      d.synthetic = s;
      d.test_per_class = j.value("test_per_class", std::size_t{0});
    } else {
      throw LoadError(Kind::kBadDescriptor, path.string() + ": unknown format '" + d.format + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(Kind::kBadDescriptor, path.string() + ": " + e.what());
  }
  return d;
}

std::string descriptor_json(const DatasetDescriptor& d) {
  nlohmann::ordered_json j;
  j["name"] = d.name;
  j["format"] = d.format;
  if (d.limit != 0) j["limit"] = d.limit;
  if (d.format == "idx") {
    j["train_images"] = d.train_images.string();
    j["train_labels"] = d.train_labels.string();
    if (!d.test_images.empty()) j["test_images"] = d.test_images.string();
    if (!d.test_labels.empty()) j["test_labels"] = d.test_labels.string();
  } else if (d.format == "cifar10") {
    auto& train = j["train_batches"] = nlohmann::ordered_json::array();
    for (const auto& p : d.train_batches) train.push_back(p.string());
    if (!d.test_batches.empty()) {
      auto& test = j["test_batches"] = nlohmann::ordered_json::array();
      for (const auto& p : d.test_batches) test.push_back(p.string());
    }
  } else if (d.synthetic) {
    const SyntheticSpec& s = *d.synthetic;
    j["num_classes"] = s.num_classes;
    j["per_class"] = s.per_class;
    j["image_shape"] = s.image_shape;
    j["margin"] = s.margin;
    j["seed"] = s.seed;
    j["noise_sigma"] = s.noise_sigma;
    j["test_per_class"] = d.test_per_class;
  }
  return j.dump(2);
}

LoadedData load_dataset(const DatasetDescriptor& d) {
  LoadedData out;
  if (d.format == "idx") {
    out.train = load_idx(d.train_images, d.train_labels);
    if (!d.test_images.empty() && !d.test_labels.empty()) {
      out.test = load_idx(d.test_images, d.test_labels);
    }
  } else if (d.format == "cifar10") {
    out.train = load_cifar10(d.train_batches);
    if (!d.test_batches.empty()) out.test = load_cifar10(d.test_batches);
  } else if (d.format == "synthetic" && d.synthetic) {
    out.train = gen_synthetic(*d.synthetic);
    if (d.test_per_class > 0) {
      SyntheticSpec test_spec = *d.synthetic;
      test_spec.per_class = d.test_per_class;
      test_spec.seed = d.synthetic->seed + 1;
      out.test = gen_synthetic(test_spec);
    }
  } else {
    throw LoadError(Kind::kBadDescriptor, "unsupported dataset format '" + d.format + "'");
  }
  if (d.limit != 0) out.train = out.train.head(d.limit);
  out.train.name = d.name;
  if (out.test) out.test->name = d.name + "-test";
  return out;
}

}  // namespace layerscope
