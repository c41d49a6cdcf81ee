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


#ifndef LAYERSCOPE_TOOLS_MANIFEST_HPP_
#define LAYERSCOPE_TOOLS_MANIFEST_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace layerscope::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  nlohmann::ordered_json config;  // resolved options
  std::vector<std::uint64_t> seeds;
  nlohmann::ordered_json inputs;
  std::vector<std::string> outputs;  // file names inside the out dir
  double wall_time_s = 0.0;
};

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

// Writes `contents` to out_dir/name and records the name.
void write_output(const std::filesystem::path& out_dir, const std::string& name,
                  const std::string& contents, std::vector<std::string>& outputs);

}  // namespace layerscope::cli

#endif  // LAYERSCOPE_TOOLS_MANIFEST_HPP_
