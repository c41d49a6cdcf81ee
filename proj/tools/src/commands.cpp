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


#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "layerscope/arch.hpp"
#include "layerscope/checkpoint.hpp"
#include "layerscope/dataset.hpp"
#include "layerscope/enclave.hpp"
#include "layerscope/errors.hpp"
#include "layerscope/exposure.hpp"
#include "layerscope/model.hpp"
#include "layerscope/train.hpp"
#include "manifest.hpp"

namespace layerscope::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Thrown for inconsistent flags; maps to kUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Tolerance for --verify; the implementation targets exact equality.
constexpr double kVerifyTolerance = 1e-12;

std::size_t thread_cap() {
  if (const char* env = std::getenv("LAYERSCOPE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct Context {
  RunOptions options;
  DatasetDescriptor descriptor;
  LoadedData data;
  std::optional<Model> checkpoint;
  std::vector<LayerSpec> specs;
};

// Fills every default so the manifest records the effective configuration.
Context resolve(RunOptions o) {
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.dataset.empty()) throw UsageError("--dataset is required");
  Context ctx;
  o.dataset = fs::absolute(o.dataset).lexically_normal();
  o.out = fs::absolute(o.out).lexically_normal();
  ctx.descriptor = load_descriptor(o.dataset);
  ctx.data = load_dataset(ctx.descriptor);

  if (!o.checkpoint.empty()) {
    if (o.command == "train") throw UsageError("train does not take --checkpoint");
    o.checkpoint = fs::absolute(o.checkpoint).lexically_normal();
    ctx.checkpoint = load_checkpoint(o.checkpoint);
    o.arch = ctx.checkpoint->arch();
    o.seed = ctx.checkpoint->seed();
    o.dropout = 0.0;
  }
  if (o.arch.empty()) o.arch = std::string(kVgg7Arch);
  ctx.specs = with_dropout_before_fc(parse_arch(o.arch), o.dropout);

  const auto [base_epochs, ft_epochs] = default_epochs(ctx.descriptor.name);
  if (!o.epochs) o.epochs = o.command == "partition" ? 1 : base_epochs;
  if (!o.ft_epochs) o.ft_epochs = ft_epochs;

  if (o.command == "exposure") {
    if (ctx.checkpoint) {
      if (!o.seeds.empty() && (o.seeds.size() != 1 || o.seeds[0] != o.seed)) {
        throw UsageError("with --checkpoint the seed is the checkpoint's (" +
                         std::to_string(o.seed) + ")");
      }
      o.seeds = {o.seed};
    } else if (o.seeds.empty()) {
      const std::size_t n = o.repeats == 0 ? 5 : o.repeats;
      for (std::size_t i = 0; i < n; ++i) o.seeds.push_back(o.seed + i);
    }
    if (o.repeats != 0 && o.repeats != o.seeds.size()) {
      throw UsageError("--repeats " + std::to_string(o.repeats) + " disagrees with " +
                       std::to_string(o.seeds.size()) + " seeds");
    }
    o.repeats = o.seeds.size();
  } else {
    // A replayed manifest carries the resolved {seed}.
    if (!o.seeds.empty() && o.seeds != std::vector<std::uint64_t>{o.seed}) {
      throw UsageError("--seeds is only valid for exposure");
    }
    o.seeds = {o.seed};
    if (o.repeats == 0) o.repeats = o.command == "partition" ? 3 : 1;
  }
  if (o.command == "partition" && ctx.checkpoint &&
      ctx.checkpoint->input_shape() != ctx.data.train.sample_shape()) {
    throw UsageError("checkpoint input shape does not match the dataset");
  }
  ctx.options = std::move(o);
  return ctx;
}

TrainConfig base_config(const RunOptions& o) {
  TrainConfig c;
  c.epochs = *o.epochs;
  c.batch_size = o.batch;
  c.learning_rate = o.lr;
  c.momentum = o.momentum;
  c.seed = o.seed;
  return c;
}

ordered_json eval_json(const Evaluation& e) {
  return {{"accuracy", e.accuracy}, {"mean_cost", e.mean_cost}};
}

void cmd_train(const Context& ctx, RunManifest& manifest) {
  const RunOptions& o = ctx.options;
  const PrivateSplit split = split_private(ctx.data.train, o.seed);
  const Model initial = init_model(ctx.specs, ctx.data.train.sample_shape(), o.seed);
  const TrainResult result = train(initial, split.private_set, base_config(o),
                                   std::vector<bool>(initial.num_param_layers(), false));
  save_checkpoint(result.model, o.out / "model.lsck");
  manifest.outputs.push_back("model.lsck");

  ordered_json j;
  j["arch"] = result.model.arch();
  j["dataset"] = ctx.descriptor.name;
  j["private_size"] = split.private_set.size();
  j["non_private_size"] = split.non_private_set.size();
  ordered_json history = ordered_json::array();
  for (const EpochStats& e : result.history) {
    history.push_back({{"mean_loss", e.mean_loss}, {"accuracy", e.accuracy}});
  }
  j["history"] = history;
  const Evaluation s = evaluate(result.model, split.private_set);
  const Evaluation t = evaluate(result.model, split.non_private_set);
  j["eval_s"] = eval_json(s);
  j["eval_t"] = eval_json(t);
  std::printf("train: %zu epochs on %zu samples; S acc %.4f cost %.4f, T acc %.4f cost %.4f\n",
              result.history.size(), split.private_set.size(), s.accuracy, s.mean_cost,
              t.accuracy, t.mean_cost);
  if (ctx.data.test) {
    const Evaluation test = evaluate(result.model, *ctx.data.test);
    j["eval_test"] = eval_json(test);
    std::printf("test accuracy %.4f\n", test.accuracy);
  }
  write_output(o.out, "train.json", j.dump(2) + "\n", manifest.outputs);
}

void cmd_exposure(const Context& ctx, RunManifest& manifest) {
  const RunOptions& o = ctx.options;
  ExposureConfig config;
  config.base_train = base_config(o);
  config.finetune = base_config(o);
  config.finetune.epochs = *o.ft_epochs;
  config.finetune.learning_rate = o.ft_lr;
  config.seeds = o.seeds;
  config.threads = thread_cap();
  const Dataset* test = ctx.data.test ? &*ctx.data.test : nullptr;

  ExposureReport report;
  if (ctx.checkpoint) {
    report = measure_model(*ctx.checkpoint, split_private(ctx.data.train, o.seed), config, test);
  } else {
    report = measure_all(ctx.specs, ctx.data.train, config, test);
  }
  report.dataset = ctx.descriptor.name;
  write_output(o.out, "exposure.json", report_json(report), manifest.outputs);
  write_output(o.out, "exposure.csv", report_csv(report), manifest.outputs);

  std::printf("%-6s %-6s %10s %10s %10s %10s %8s\n", "layer", "token", "eps_s", "eps_b", "risk",
              "risk_ci", "excluded");
  for (const LayerSummary& l : report.layers) {
    std::printf("%-6zu %-6s %10.5f %10.5f %10.5f %10.5f %8zu\n", l.layer, l.token.c_str(),
                l.eps_s.mean, l.eps_b.mean, l.risk.mean, l.risk.ci_half_width, l.excluded_cells);
  }
  if (!report.ci_defined) std::printf("single repeat: confidence intervals are zero-width\n");
}

int cmd_partition(const Context& ctx, RunManifest& manifest) {
  const RunOptions& o = ctx.options;
  const Model model = ctx.checkpoint
                          ? *ctx.checkpoint
                          : init_model(ctx.specs, ctx.data.train.sample_shape(), o.seed);
  const Dataset s = split_private(ctx.data.train, o.seed).private_set;
  const TrainConfig config = base_config(o);
  PartitionOptions options;
  options.repeats = o.repeats;
  options.verify = o.verify;

  std::vector<CostReport> reports;
  if (o.cut) {
    const PartitionPlan plan{*o.cut, o.budget_bytes, o.batch};
    reports.push_back(run_partitioned_training(model, plan, s, config, options).report);
  } else {
    reports = sweep_cuts(model, s, config, o.budget_bytes, options);
  }
  if (o.verify) {
    for (const CostReport& r : reports) {
      if (r.max_param_diff && *r.max_param_diff > kVerifyTolerance) {
        std::fprintf(stderr,
                     "verify failed: cut %zu (%s) differs from monolithic training by %.3g\n",
                     r.cut_index, r.cut_label.c_str(), *r.max_param_diff);
        return kFailure;
      }
    }
  }
  write_output(o.out, "partition.csv", cost_report_csv(reports), manifest.outputs);
  write_output(o.out, "partition.json", cost_report_json(reports), manifest.outputs);

  std::size_t feasible = 0;
  for (const CostReport& r : reports) {
    if (r.skipped) {
      std::printf("%-4s secure_layers=%zu bytes=%llu skipped\n", r.cut_label.c_str(),
                  r.param_layers_secure,
                  static_cast<unsigned long long>(r.memory.total_bytes));
      continue;
    }
    ++feasible;
    std::printf("%-4s secure_layers=%zu bytes=%llu overhead=%.4f bytes/batch=%llu\n",
                r.cut_label.c_str(), r.param_layers_secure,
                static_cast<unsigned long long>(r.memory.total_bytes), r.overhead_fraction,
                static_cast<unsigned long long>(r.boundary_bytes_per_batch));
  }
  if (feasible == 0) std::fprintf(stderr, "warning: every cut exceeds the memory budget\n");
  return kOk;
}

}  // namespace

std::pair<std::size_t, std::size_t> default_epochs(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.find("fashion") != std::string::npos) return {40, 20};
  if (lower.find("cifar") != std::string::npos) return {60, 30};
  if (lower.find("mnist") != std::string::npos) return {20, 10};
  if (lower.find("synthetic") != std::string::npos) return {10, 5};
  return {20, 10};
}

ordered_json options_json(const RunOptions& o) {
  ordered_json j;
  j["command"] = o.command;
  j["dataset"] = o.dataset.string();
  j["checkpoint"] = o.checkpoint.string();
  j["arch"] = o.arch;
  j["dropout"] = o.dropout;
  j["seed"] = o.seed;
  j["seeds"] = o.seeds;
  j["repeats"] = o.repeats;
  j["epochs"] = o.epochs ? ordered_json(*o.epochs) : ordered_json(nullptr);
  j["ft_epochs"] = o.ft_epochs ? ordered_json(*o.ft_epochs) : ordered_json(nullptr);
  j["batch"] = o.batch;
  j["lr"] = o.lr;
  j["ft_lr"] = o.ft_lr;
  j["momentum"] = o.momentum;
  j["budget_bytes"] = o.budget_bytes;
  j["cut"] = o.cut ? ordered_json(*o.cut) : ordered_json(nullptr);
  j["verify"] = o.verify;
  j["out"] = o.out.string();
  return j;
}

RunOptions options_from_json(const nlohmann::json& j) {
  RunOptions o;
  o.command = j.at("command").get<std::string>();
  o.dataset = j.at("dataset").get<std::string>();
  o.checkpoint = j.value("checkpoint", std::string());
  o.arch = j.value("arch", std::string());
  o.dropout = j.value("dropout", o.dropout);
  o.seed = j.value("seed", o.seed);
  o.seeds = j.value("seeds", o.seeds);
  o.repeats = j.value("repeats", o.repeats);
  if (j.contains("epochs") && !j["epochs"].is_null()) o.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("ft_epochs") && !j["ft_epochs"].is_null()) {
    o.ft_epochs = j["ft_epochs"].get<std::size_t>();
  }
  o.batch = j.value("batch", o.batch);
  o.lr = j.value("lr", o.lr);
  o.ft_lr = j.value("ft_lr", o.ft_lr);
  o.momentum = j.value("momentum", o.momentum);
  o.budget_bytes = j.value("budget_bytes", o.budget_bytes);
  if (j.contains("cut") && !j["cut"].is_null()) o.cut = j["cut"].get<std::size_t>();
  o.verify = j.value("verify", o.verify);
  o.out = j.value("out", std::string());
  return o;
}

int run_command(RunOptions options) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Context ctx = resolve(std::move(options));
    const RunOptions& o = ctx.options;
    fs::create_directories(o.out);

    RunManifest manifest;
    manifest.command = o.command;
    manifest.config = options_json(o);
    manifest.seeds = o.seeds;
    manifest.inputs["dataset"] = {{"path", o.dataset.string()},
                                  {"descriptor", ordered_json::parse(descriptor_json(ctx.descriptor))}};
    if (!o.checkpoint.empty()) manifest.inputs["checkpoint"] = o.checkpoint.string();

    int code = kOk;
    if (o.command == "train") {
      cmd_train(ctx, manifest);
    } else if (o.command == "exposure") {
      cmd_exposure(ctx, manifest);
    } else if (o.command == "partition") {
      code = cmd_partition(ctx, manifest);
    } else {
      throw UsageError("unknown command '" + o.command + "'");
    }
    if (code != kOk) return code;
    manifest.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(o.out, manifest);
    return kOk;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "architecture error at token %zu: %s\n", e.token_index(), e.what());
    return kUsage;
  } catch (const LoadError& e) {
    std::fprintf(stderr, "data error (%s): %s\n", to_string(e.kind()), e.what());
    return kDataError;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kDataError;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kDivergence;
  } catch (const BudgetError& e) {
    std::fprintf(stderr, "budget error: %s\n", e.what());
    return kBudget;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
}

int replay(const fs::path& manifest_path, const fs::path& out_override) {
  RunManifest manifest;
  try {
    manifest = read_manifest(manifest_path);
  } catch (const LoadError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kDataError;
  }
  RunOptions options = options_from_json(manifest.config);
  if (!out_override.empty()) options.out = out_override;
  return run_command(std::move(options));
}

}  // namespace layerscope::cli
