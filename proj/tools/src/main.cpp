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


// layerscope: train, measure per-layer exposure, and simulate partitioned
// training. Run `layerscope --help` for the command list.

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "commands.hpp"
#include "layerscope/enclave.hpp"

namespace {

using layerscope::cli::RunOptions;

void add_common(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--dataset", o.dataset, "Dataset descriptor (JSON)")->required();
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--arch", o.arch, "Architecture string (default VGG-7)");
  cmd->add_option("--dropout", o.dropout,
                  "Dropout rate inserted before the first FC layer (0 disables)")
      ->check(CLI::Range(0.0, 0.99));
  cmd->add_option("--seed", o.seed, "Seed for split, initialization and training");
  cmd->add_option("--epochs", o.epochs, "Base training epochs (default per dataset)");
  cmd->add_option("--batch", o.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--momentum", o.momentum, "SGD momentum")->check(CLI::Range(0.0, 0.999));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layerscope: per-layer exposure measurement and partitioned training"};
  app.require_subcommand(1);

  RunOptions train_opts, exposure_opts, partition_opts;
  train_opts.command = "train";
  exposure_opts.command = "exposure";
  partition_opts.command = "partition";

  CLI::App* train = app.add_subcommand("train", "Train the base model on the private split");
  add_common(train, train_opts);

  CLI::App* exposure = app.add_subcommand("exposure", "Measure per-layer exposure risk");
  add_common(exposure, exposure_opts);
  exposure->add_option("--checkpoint", exposure_opts.checkpoint,
                       "Measure this trained model instead of training per seed");
  exposure->add_option("--seeds", exposure_opts.seeds, "Comma-separated seeds")
      ->delimiter(',');
  exposure->add_option("--repeats", exposure_opts.repeats, "Number of seeds (from --seed)");
  exposure->add_option("--ft-epochs", exposure_opts.ft_epochs, "Fine-tune epochs");
  exposure->add_option("--ft-lr", exposure_opts.ft_lr, "Fine-tune learning rate")
      ->check(CLI::NonNegativeNumber);

  CLI::App* partition =
      app.add_subcommand("partition", "Sweep secure-region cuts and report overhead");
  add_common(partition, partition_opts);
  partition->add_option("--checkpoint", partition_opts.checkpoint, "Start from this model");
  partition->add_option("--budget-bytes,--budget", partition_opts.budget_bytes,
                        "Secure memory budget (default 16 MiB)");
  partition->add_option("--cut", partition_opts.cut,
                        "Single cut: first secure stack position (0-based)");
  partition->add_option("--repeats", partition_opts.repeats,
                        "Timing repeats; wall times are averaged");
  partition->add_flag("--verify", partition_opts.verify,
                      "Fail unless partitioned parameters equal monolithic ones");

  std::string manifest, replay_out;
  CLI::App* replay = app.add_subcommand("replay", "Re-run a command from its manifest.json");
  replay->add_option("--manifest", manifest, "Manifest to replay")->required();
  replay->add_option("--out", replay_out, "Write outputs here instead");

  int worker_fd = -1;
  CLI::App* worker = app.add_subcommand("worker", "");  // empty description hides it
  worker->group("");
  worker->add_option("--fd", worker_fd)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : layerscope::cli::kUsage;
  }

  if (*worker) return layerscope::run_worker(worker_fd);
  if (*replay) return layerscope::cli::replay(manifest, replay_out);
  if (*train) return layerscope::cli::run_command(train_opts);
  if (*exposure) return layerscope::cli::run_command(exposure_opts);
  return layerscope::cli::run_command(partition_opts);
}
