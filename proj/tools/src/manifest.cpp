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


#include "manifest.hpp"

#include <fstream>

#include "layerscope/errors.hpp"

namespace layerscope::cli {

void write_output(const std::filesystem::path& out_dir, const std::string& name,
                  const std::string& contents, std::vector<std::string>& outputs) {
  std::ofstream out(out_dir / name, std::ios::binary);
  out << contents;
  if (!out) throw Error("cannot write " + (out_dir / name).string());
  outputs.push_back(name);
}

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "layerscope";
  j["version"] = kToolVersion;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seeds"] = m.seeds;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["wall_time_s"] = m.wall_time_s;
  std::ofstream out(out_dir / "manifest.json");
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (out_dir / "manifest.json").string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(LoadError::Kind::kIo, "cannot open manifest " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.inputs = j.value("inputs", nlohmann::ordered_json::object());
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.wall_time_s = j.value("wall_time_s", 0.0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadError::Kind::kBadDescriptor, path.string() + ": " + e.what());
  }
}

}  // namespace layerscope::cli
