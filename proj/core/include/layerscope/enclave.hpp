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


#ifndef LAYERSCOPE_ENCLAVE_HPP_
#define LAYERSCOPE_ENCLAVE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "layerscope/dataset.hpp"
#include "layerscope/model.hpp"
#include "layerscope/train.hpp"

namespace layerscope {

inline constexpr std::uint64_t kDefaultBudgetBytes = std::uint64_t{16} << 20;

// Layers [cut_index, end) plus the cost computation run in the secure
// worker. cut_index == num_layers() is the empty region.
struct PartitionPlan {
  std::size_t cut_index = 0;
  std::uint64_t budget_bytes = kDefaultBudgetBytes;
  std::size_t batch_size = 128;
};

struct SecureLayerBytes {
  std::size_t position = 0;
  std::string token;
  std::uint64_t params_bytes = 0;
  std::uint64_t grads_bytes = 0;
  std::uint64_t momentum_bytes = 0;
  std::uint64_t activation_bytes = 0;
};

struct CopiedLayer {
  std::size_t position = 0;
  std::string token;
  std::uint64_t bytes = 0;  // weights + bias
};

struct MemoryAccount {
  std::vector<SecureLayerBytes> layers;
  std::vector<CopiedLayer> copied_front_layers;
  std::uint64_t input_bytes = 0;  // boundary activation buffer
  std::uint64_t total_bytes = 0;

  std::uint64_t copied_front_bytes() const;
  std::size_t param_layers() const;
};

// 8-byte elements throughout. Each parameterized secure layer holds params,
// grads and momentum; every secure layer holds its output activations for
// one batch; the boundary input buffer holds one batch of cut activations.
// A region whose first layer is parameterless (maxpool, dropout) also holds
// a copy of the nearest preceding parameterized layer's weights and bias.
MemoryAccount account_memory(const Model& model, const PartitionPlan& plan);

// Returns the account, or throws BudgetError when it exceeds the budget.
// Throws std::out_of_range for a cut past the end of the stack.
MemoryAccount validate_plan(const Model& model, const PartitionPlan& plan);

// Label of the first secure layer as used on sweep axes (C, MP, D, FC, SM),
// or "none" for the empty region.
std::string cut_label(const Model& model, std::size_t cut_index);

struct CostReport {
  std::size_t cut_index = 0;
  std::string cut_label;
  std::size_t param_layers_secure = 0;
  MemoryAccount memory;
  bool skipped = false;
  std::string skip_reason;
  double wall_monolithic_s = 0.0;
  double wall_partitioned_s = 0.0;
  // Time the partitioned run spends outside layer computation on either
  // side: spawn, init, serialization, transport and parameter return.
  double boundary_s = 0.0;
  // boundary_s / wall_monolithic_s.
  double overhead_fraction = 0.0;
  std::uint64_t boundary_bytes_per_batch = 0;  // full batch, from the formula
  std::uint32_t crossings_per_batch = 2;
  std::uint64_t batches = 0;
  std::uint64_t expected_boundary_bytes = 0;  // formula summed over batches
  std::uint64_t measured_boundary_bytes = 0;  // counted on the stream
  std::optional<double> max_param_diff;       // set by verification
};

struct PartitionOptions {
  // Executable that serves `<exe> worker --fd N`. Empty means this process's
  // own executable.
  std::filesystem::path worker_executable;
  // Timing repeats; reported wall times are means over them.
  std::size_t repeats = 3;
  // Compare partitioned parameters to the monolithic run.
  bool verify = false;
};

struct PartitionResult {
  Model model;
  std::vector<EpochStats> history;
  CostReport report;
};

// Trains `model` with layers [cut, end) in a spawned worker process and the
// rest here. Frozen flags of `model` are honoured on both sides. The result
// is bitwise identical to train() on the same inputs. Also times a
// monolithic train() for the overhead figure.
//
// Throws BudgetError before spawning anything when the plan does not fit,
// BoundaryError on worker failure and DivergenceError on a non-finite loss.
PartitionResult run_partitioned_training(const Model& model, const PartitionPlan& plan,
                                         const Dataset& data, const TrainConfig& config,
                                         const PartitionOptions& options = {});

// Worker side of the boundary; serves one session on `fd` and returns the
// process exit code (0, or 5 when the budget check fails).
int run_worker(int fd);

// Cuts from the last layer backwards while the plan fits the budget; the
// first infeasible cut and every earlier one are reported as skipped.
std::vector<CostReport> sweep_cuts(const Model& model, const Dataset& data,
                                   const TrainConfig& config, std::uint64_t budget_bytes,
                                   const PartitionOptions& options = {});

std::string cost_report_csv(const std::vector<CostReport>& reports);
std::string cost_report_json(const std::vector<CostReport>& reports);

}  // namespace layerscope

#endif  // LAYERSCOPE_ENCLAVE_HPP_
