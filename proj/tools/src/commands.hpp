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


#ifndef LAYERSCOPE_TOOLS_COMMANDS_HPP_
#define LAYERSCOPE_TOOLS_COMMANDS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace layerscope::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kDataError = 3,
  kDivergence = 4,
  kBudget = 5,
};

// Everything a command needs. Optional fields are resolved from the dataset
// (epoch schedule) or the checkpoint before the command runs; the resolved
// form is what the manifest records.
struct RunOptions {
  std::string command;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::string arch;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::size_t repeats = 0;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> ft_epochs;
  std::size_t batch = 128;
  double lr = 0.01;
  double ft_lr = 0.001;
  double momentum = 0.9;
  std::uint64_t budget_bytes = std::uint64_t{16} << 20;
  std::optional<std::size_t> cut;
  bool verify = false;
  std::filesystem::path out;
};

// Base / fine-tune epochs for a dataset name: MNIST 20/10,
// Fashion-MNIST 40/20, CIFAR-10 60/30, synthetic 10/5.
std::pair<std::size_t, std::size_t> default_epochs(const std::string& dataset_name);

nlohmann::ordered_json options_json(const RunOptions& options);
RunOptions options_from_json(const nlohmann::json& j);

// Runs a resolved or unresolved command, writing outputs and manifest.json
// into options.out. Returns an ExitCode; errors are reported on stderr.
int run_command(RunOptions options);

// Re-runs the command recorded in a manifest, optionally into another
// directory.
int replay(const std::filesystem::path& manifest, const std::filesystem::path& out_override);

}  // namespace layerscope::cli

#endif  // LAYERSCOPE_TOOLS_COMMANDS_HPP_
