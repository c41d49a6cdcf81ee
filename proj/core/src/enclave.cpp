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


#include "layerscope/enclave.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "layerscope/bytes.hpp"
#include "layerscope/checkpoint.hpp"
#include "layerscope/errors.hpp"
#include "layerscope/protocol.hpp"

extern char** environ;

namespace layerscope {
namespace {

constexpr std::uint64_t kElem = sizeof(double);

std::uint64_t param_bytes(const LayerParams& p) {
  return (p.weights.value.size() + p.bias.value.size()) * kElem;
}

void write_tensor(ByteWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u64(d);
  w.f64s(t.data());
}

Tensor read_tensor(ByteReader& r) {
  Shape shape(r.u32());
  for (auto& d : shape) d = r.u64();
  Tensor t(shape);
  r.f64s(t.data());
  return t;
}

std::optional<std::size_t> first_unfrozen_position(const Model& model, std::size_t end) {
  for (std::size_t i = 0; i < model.num_param_layers(); ++i) {
    const std::size_t pos = model.param_position(i);
    if (pos >= end) break;
    if (!model.params(i).weights.frozen) return pos;
  }
  return std::nullopt;
}

std::size_t params_before(const Model& model, std::size_t position) {
  std::size_t n = 0;
  while (n < model.num_param_layers() && model.param_position(n) < position) ++n;
  return n;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// The worker process and its end of the socket pair. Destruction closes the
// socket (the worker sees EOF and exits) and reaps the child.
class WorkerProcess {
 public:
  explicit WorkerProcess(const std::filesystem::path& executable) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
      throw BoundaryError(std::string("socketpair: ") + std::strerror(errno));
    }
    fd_ = sv[0];
    // The child inherits only its own end.
    ::fcntl(sv[1], F_SETFD, 0);
    const std::string exe = executable.string();
    const std::string fd_arg = std::to_string(sv[1]);
    char* argv[] = {const_cast<char*>(exe.c_str()), const_cast<char*>("worker"),
                    const_cast<char*>("--fd"), const_cast<char*>(fd_arg.c_str()), nullptr};
    const int rc = ::posix_spawn(&pid_, exe.c_str(), nullptr, nullptr, argv, environ);
    ::close(sv[1]);
    if (rc != 0) {
      ::close(fd_);
      throw BoundaryError("cannot spawn worker " + exe + ": " + std::strerror(rc));
    }
  }
  WorkerProcess(const WorkerProcess&) = delete;
  WorkerProcess& operator=(const WorkerProcess&) = delete;
  ~WorkerProcess() { wait(); }

  int fd() const { return fd_; }

  // Returns the exit status, or -signal.
  int wait() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
    if (pid_ <= 0) return status_;
    int raw = 0;
    while (::waitpid(pid_, &raw, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
    status_ = WIFEXITED(raw) ? WEXITSTATUS(raw) : -WTERMSIG(raw);
    return status_;
  }

 private:
  int fd_ = -1;
  pid_t pid_ = -1;
  int status_ = 0;
};

struct PartitionedRun {
  Model model;
  std::vector<EpochStats> history;
  std::uint64_t batches = 0;
  std::uint64_t expected_bytes = 0;
  std::uint64_t measured_bytes = 0;
};

std::vector<std::uint8_t> encode_init(const Model& model, const PartitionPlan& plan,
                                      const TrainConfig& config) {
  const Model suffix = model.suffix(plan.cut_index);
  ByteWriter w;
  w.u64(plan.budget_bytes);
  w.u64(plan.batch_size);
  w.f64(config.learning_rate);
  w.f64(config.momentum);
  w.u64(config.seed);
  w.u64(plan.cut_index);
  const std::vector<bool> mask = suffix.freeze_mask();
  w.u32(static_cast<std::uint32_t>(mask.size()));
  for (bool frozen : mask) w.u32(frozen ? 1 : 0);
  const std::vector<std::uint8_t> checkpoint = encode_checkpoint(suffix);
  w.u64(checkpoint.size());
  w.bytes(checkpoint);
  // Front-layer copy: the weights the secure region must hold although it
  // does not train them.
  const MemoryAccount account = account_memory(model, plan);
  w.u32(static_cast<std::uint32_t>(account.copied_front_layers.size()));
  for (const CopiedLayer& c : account.copied_front_layers) {
    const LayerParams& p = model.params(*model.param_index(c.position));
    write_tensor(w, p.weights.value);
    write_tensor(w, p.bias.value);
  }
  return w.take();
}

// One train() step at a time, so a monolithic step can be timed right next
// to the matching partitioned step.
class MonolithicStepper {
 public:
  MonolithicStepper(const Model& model, const TrainConfig& config)
      : model_(model),
        config_(config),
        optimizer_(model_, config.learning_rate, config.momentum),
        stop_(first_unfrozen_position(model_, kToEnd)) {}

  void step(const Tensor& x, std::span<const int> labels, std::size_t epoch, std::size_t batch) {
    ForwardTrace trace;
    const Tensor logits = forward(model_, x, Mode::kTrain, {config_.seed, epoch, batch},
                                  stop_ ? &trace : nullptr);
    const kernels::SoftmaxCrossEntropy ce = kernels::softmax_cross_entropy(logits, labels);
    if (!std::isfinite(ce.loss)) throw DivergenceError(epoch, batch);
    if (stop_) {
      backward(model_, trace, kernels::softmax_cross_entropy_backward(ce.probs, labels), *stop_,
               false);
      optimizer_.step(model_);
    }
  }

 private:
  Model model_;
  TrainConfig config_;
  SgdMomentum optimizer_;
  std::optional<std::size_t> stop_;
};

struct PairedTiming {
  double monolithic_s = 0.0;
  double partitioned_s = 0.0;
  double boundary_s = 0.0;
};

// With `paired` set, each batch also runs one monolithic step, alternating
// which mode goes first. Partitioned time includes spawn, init and the
// parameter return; batch gathering is charged to neither mode.
PartitionedRun run_partitioned_once(const Model& model, const PartitionPlan& plan,
                                    const Dataset& data, const TrainConfig& config,
                                    const std::filesystem::path& executable,
                                    MonolithicStepper* paired = nullptr,
                                    PairedTiming* timing = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  double excluded_s = 0.0;
  double monolithic_s = 0.0;
  double compute_s = 0.0;  // host and worker layer work, boundary excluded
  const std::size_t cut = plan.cut_index;
  PartitionedRun run{model, {}, 0, 0, 0};
  Model& host = run.model;
  const std::size_t front_params = params_before(host, cut);
  const std::optional<std::size_t> stop = first_unfrozen_position(host, cut);
  SgdMomentum optimizer(host, config.learning_rate, config.momentum);

  WorkerProcess worker(executable);
  Channel channel(worker.fd());
  channel.send(MessageType::kInit, encode_init(model, plan, config));
  const Frame ready = channel.receive();
  if (ready.type == MessageType::kError) {
    const WorkerError e = decode_worker_error(ready.payload);
    if (e.kind == WorkerError::Kind::kBudget) throw BudgetError(e.total_bytes, e.budget_bytes);
    throw BoundaryError("worker error: " + e.message);
  }
  if (ready.type != MessageType::kStepDone) {
    throw BoundaryError(std::string("boundary desync: expected STEP_DONE, got ") +
                        to_string(ready.type));
  }

  const std::size_t n = data.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(n, config, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch = 0;
    for (std::size_t offset = 0; offset < n; offset += config.batch_size, ++batch) {
      const std::span<const std::size_t> idx =
          std::span(order).subspan(offset, std::min(config.batch_size, n - offset));
      auto t0 = std::chrono::steady_clock::now();
      const std::vector<int> labels = data.gather_labels(idx);
      const Tensor x = data.gather(idx);
      excluded_s += seconds_since(t0);
      const bool monolithic_first = batch % 2 == 0;
      auto monolithic_step = [&] {
        const auto m0 = std::chrono::steady_clock::now();
        paired->step(x, labels, epoch, batch);
        monolithic_s += seconds_since(m0);
      };
      if (paired != nullptr && monolithic_first) monolithic_step();

      t0 = std::chrono::steady_clock::now();
      ForwardTrace trace;
      const Tensor acts = forward(host, x, Mode::kTrain,
                                  {config.seed, epoch, batch}, stop ? &trace : nullptr, 0, cut);
      compute_s += seconds_since(t0);
      const std::size_t elems = acts.size() / idx.size();
      const std::uint64_t wire_before = channel.bytes_sent() + channel.bytes_received();

      ByteWriter fwd;
      fwd.u64(epoch);
      fwd.u64(batch);
      fwd.u64(idx.size());
      fwd.u64(elems);
      for (int y : labels) fwd.i32(y);
      fwd.f64s(acts.data());
      channel.send(MessageType::kForwardAct, fwd.buffer());

      const Frame loss_frame = channel.expect(MessageType::kLoss);
      const Frame grad_frame = channel.expect(MessageType::kBackwardGrad);
      run.measured_bytes += channel.bytes_sent() + channel.bytes_received() - wire_before;
      run.expected_bytes += boundary_bytes(idx.size(), elems);
      ++run.batches;

      Tensor grad(acts.shape());
      double batch_loss = 0.0;
      try {
        ByteReader lr(loss_frame.payload);
        if (lr.u64() != idx.size()) throw BoundaryError("LOSS count mismatch");
        correct += lr.u64();
        double total = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i) total += lr.f64();
        batch_loss = total / static_cast<double>(idx.size());
        ByteReader gr(grad_frame.payload);
        if (gr.u64() != idx.size() || gr.u64() != elems) {
          throw BoundaryError("BACKWARD_GRAD shape mismatch");
        }
        gr.f64s(grad.data());
      } catch (const std::out_of_range& e) {
        throw BoundaryError(std::string("short frame from worker: ") + e.what());
      }
      if (!std::isfinite(batch_loss)) throw DivergenceError(epoch, batch);
      loss_sum += batch_loss * static_cast<double>(idx.size());

      if (stop) {
        t0 = std::chrono::steady_clock::now();
        backward(host, trace, std::move(grad), *stop, false);
        optimizer.step(host, 0, front_params);
        compute_s += seconds_since(t0);
      }
      if (paired != nullptr && !monolithic_first) monolithic_step();
    }
    run.history.push_back(
        {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)});
  }

  channel.send(MessageType::kShutdown, {});
  const Frame params = channel.expect(MessageType::kParams);
  try {
    ByteReader r(params.payload);
    compute_s += r.f64();
    for (std::size_t i = front_params; i < host.num_param_layers(); ++i) {
      Tensor w = read_tensor(r);
      Tensor b = read_tensor(r);
      if (w.shape() != host.params(i).weights.value.shape() ||
          b.shape() != host.params(i).bias.value.shape()) {
        throw BoundaryError("PARAMS shape mismatch");
      }
      host.params(i).weights.value = std::move(w);
      host.params(i).bias.value = std::move(b);
    }
  } catch (const std::out_of_range& e) {
    throw BoundaryError(std::string("short PARAMS frame: ") + e.what());
  }
  const int status = worker.wait();
  if (status != 0) throw BoundaryError("worker exited with status " + std::to_string(status));
  if (timing != nullptr) {
    const double partitioned_s = seconds_since(start) - monolithic_s - excluded_s;
    timing->monolithic_s += monolithic_s;
    timing->partitioned_s += partitioned_s;
    timing->boundary_s += std::max(partitioned_s - compute_s, 0.0);
  }
  return run;
}

std::filesystem::path resolve_executable(const PartitionOptions& options) {
  if (!options.worker_executable.empty()) return options.worker_executable;
  return std::filesystem::read_symlink("/proc/self/exe");
}

CostReport describe_cut(const Model& model, const PartitionPlan& plan) {
  CostReport r;
  r.cut_index = plan.cut_index;
  r.cut_label = cut_label(model, plan.cut_index);
  r.memory = account_memory(model, plan);
  r.param_layers_secure = r.memory.param_layers();
  if (plan.cut_index < model.num_layers()) {
    r.boundary_bytes_per_batch =
        boundary_bytes(plan.batch_size, shape_size(model.layer_input_shape(plan.cut_index)));
  }
  return r;
}

void warm_up(const Model& model, const Dataset& data, const TrainConfig& config) {
  train(model, data, config, model.freeze_mask());
}

// Both modes run the same layer arithmetic, so the cost of partitioning is
// whatever the partitioned run spends outside it. That is timed directly:
// on a noisy host the difference of two wall times swings by several
// percent, far more than the boundary costs near the head. Wall times are
// still paired per batch so they see the same throughput drift. Reported
// figures are means over the repeats.
PartitionedRun time_cut(const Model& model, const PartitionPlan& plan, const Dataset& data,
                        const TrainConfig& config, const PartitionOptions& options,
                        CostReport& report) {
  const std::filesystem::path exe = resolve_executable(options);
  const std::size_t repeats = std::max<std::size_t>(options.repeats, 1);
  PairedTiming timing;
  PartitionedRun run;
  for (std::size_t r = 0; r < repeats; ++r) {
    MonolithicStepper monolithic(model, config);
    run = run_partitioned_once(model, plan, data, config, exe, &monolithic, &timing);
  }
  report.wall_monolithic_s = timing.monolithic_s / static_cast<double>(repeats);
  report.wall_partitioned_s = timing.partitioned_s / static_cast<double>(repeats);
  report.boundary_s = timing.boundary_s / static_cast<double>(repeats);
  report.overhead_fraction =
      report.wall_monolithic_s > 0.0 ? report.boundary_s / report.wall_monolithic_s : 0.0;
  report.batches = run.batches;
  report.expected_boundary_bytes = run.expected_bytes;
  report.measured_boundary_bytes = run.measured_bytes;
  if (options.verify) {
    const TrainResult reference = train(model, data, config, model.freeze_mask());
    report.max_param_diff = max_param_diff(run.model, reference.model);
  }
  return run;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::uint64_t MemoryAccount::copied_front_bytes() const {
  std::uint64_t total = 0;
  for (const CopiedLayer& c : copied_front_layers) total += c.bytes;
  return total;
}

std::size_t MemoryAccount::param_layers() const {
  return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const auto& l) {
    return l.params_bytes > 0;
  }));
}

MemoryAccount account_memory(const Model& model, const PartitionPlan& plan) {
  if (plan.cut_index > model.num_layers()) {
    throw std::out_of_range("cut " + std::to_string(plan.cut_index) + " past the end of a " +
                            std::to_string(model.num_layers()) + "-layer stack");
  }
  MemoryAccount account;
  if (plan.cut_index == model.num_layers()) return account;

  const std::uint64_t batch = plan.batch_size;
  for (std::size_t pos = plan.cut_index; pos < model.num_layers(); ++pos) {
    SecureLayerBytes layer;
    layer.position = pos;
    layer.token = model.specs()[pos].token();
    if (const auto index = model.param_index(pos)) {
      layer.params_bytes = param_bytes(model.params(*index));
      layer.grads_bytes = layer.params_bytes;
      layer.momentum_bytes = layer.params_bytes;
    }
    layer.activation_bytes = shape_size(model.layer_output_shape(pos)) * batch * kElem;
    account.total_bytes += layer.params_bytes + layer.grads_bytes + layer.momentum_bytes +
                           layer.activation_bytes;
    account.layers.push_back(layer);
  }
  account.input_bytes = shape_size(model.layer_input_shape(plan.cut_index)) * batch * kElem;
  account.total_bytes += account.input_bytes;

  if (!model.specs()[plan.cut_index].has_params()) {
    for (std::size_t pos = plan.cut_index; pos-- > 0;) {
      if (const auto index = model.param_index(pos)) {
        const CopiedLayer copy{pos, model.specs()[pos].token(), param_bytes(model.params(*index))};
        account.copied_front_layers.push_back(copy);
        account.total_bytes += copy.bytes;
        break;
      }
    }
  }
  return account;
}

MemoryAccount validate_plan(const Model& model, const PartitionPlan& plan) {
  MemoryAccount account = account_memory(model, plan);
  if (account.total_bytes > plan.budget_bytes) {
    throw BudgetError(account.total_bytes, plan.budget_bytes);
  }
  return account;
}

std::string cut_label(const Model& model, std::size_t cut_index) {
  if (cut_index >= model.num_layers()) return "none";
  return model.specs()[cut_index].label();
}

PartitionResult run_partitioned_training(const Model& model, const PartitionPlan& plan,
                                         const Dataset& data, const TrainConfig& config,
                                         const PartitionOptions& options) {
  config.validate();
  if (plan.batch_size != config.batch_size) {
    throw std::invalid_argument("plan batch size " + std::to_string(plan.batch_size) +
                                " differs from training batch size " +
                                std::to_string(config.batch_size));
  }
  validate_plan(model, plan);
  CostReport report = describe_cut(model, plan);

  if (plan.cut_index == model.num_layers()) {
    // Nothing is secure: the partitioned run is the monolithic run.
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult mono = train(model, data, config, model.freeze_mask());
    report.wall_monolithic_s = report.wall_partitioned_s = seconds_since(t0);
    report.crossings_per_batch = 0;
    if (options.verify) report.max_param_diff = 0.0;
    return {std::move(mono.model), std::move(mono.history), report};
  }
  warm_up(model, data, config);
  PartitionedRun run = time_cut(model, plan, data, config, options, report);
  return {std::move(run.model), std::move(run.history), report};
}

int run_worker(int fd) {
  Channel channel(fd);
  auto report_error = [&](const WorkerError& error) {
    try {
      channel.send(MessageType::kError, encode_worker_error(error));
    } catch (const BoundaryError&) {
    }
  };
  try {
    const Frame init = channel.expect(MessageType::kInit);
    ByteReader r(init.payload);
    PartitionPlan plan;
    plan.cut_index = 0;
    plan.budget_bytes = r.u64();
    plan.batch_size = r.u64();
    const double learning_rate = r.f64();
    const double momentum = r.f64();
    const std::uint64_t seed = r.u64();
    const std::uint64_t offset = r.u64();
    std::vector<bool> mask(r.u32());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = r.u32() != 0;
    const Model decoded = decode_checkpoint(r.bytes(r.u64()));
    // Rebuild at the absolute offset so dropout streams match the full stack.
    Model secure(decoded.specs(), decoded.input_shape(), decoded.seed(), offset);
    for (std::size_t i = 0; i < secure.num_param_layers(); ++i) {
      secure.params(i) = decoded.params(i);
    }
    secure.set_freeze_mask(mask);
    std::vector<Tensor> copied;
    const std::uint32_t copies = r.u32();
    for (std::uint32_t i = 0; i < 2 * copies; ++i) copied.push_back(read_tensor(r));

    // Budget re-check against what this process actually holds.
    std::uint64_t total = account_memory(secure, plan).total_bytes;
    for (const Tensor& t : copied) total += t.size() * kElem;
    if (total > plan.budget_bytes) {
      report_error({WorkerError::Kind::kBudget, total, plan.budget_bytes,
                    "secure region needs " + std::to_string(total) + " bytes, budget is " +
                        std::to_string(plan.budget_bytes)});
      return 5;
    }
    channel.send(MessageType::kStepDone, {});

    SgdMomentum optimizer(secure, learning_rate, momentum);
    double compute_s = 0.0;
    for (;;) {
      const Frame frame = channel.receive();
      if (frame.type == MessageType::kShutdown) break;
      if (frame.type != MessageType::kForwardAct) {
        throw BoundaryError(std::string("unexpected ") + to_string(frame.type) + " frame");
      }
      ByteReader f(frame.payload);
      const std::uint64_t epoch = f.u64();
      const std::uint64_t batch = f.u64();
      const std::size_t count = f.u64();
      const std::size_t elems = f.u64();
      if (count == 0 || elems != shape_size(secure.input_shape())) {
        throw BoundaryError("FORWARD_ACT shape mismatch");
      }
      std::vector<int> labels(count);
      for (int& y : labels) y = f.i32();
      Shape shape{count};
      shape.insert(shape.end(), secure.input_shape().begin(), secure.input_shape().end());
      Tensor acts(shape);
      f.f64s(acts.data());

      auto t0 = std::chrono::steady_clock::now();
      ForwardTrace trace;
      const Tensor logits = forward(secure, acts, Mode::kTrain, {seed, epoch, batch}, &trace);
      const kernels::SoftmaxCrossEntropy ce = kernels::softmax_cross_entropy(logits, labels);
      const std::size_t correct = count_correct(logits, labels);
      compute_s += seconds_since(t0);
      ByteWriter loss;
      loss.u64(count);
      loss.u64(correct);
      loss.f64s(ce.losses);
      channel.send(MessageType::kLoss, loss.buffer());

      t0 = std::chrono::steady_clock::now();
      const Tensor grad = backward(
          secure, trace, kernels::softmax_cross_entropy_backward(ce.probs, labels), 0, true);
      optimizer.step(secure);
      compute_s += seconds_since(t0);
      ByteWriter g;
      g.u64(count);
      g.u64(elems);
      g.f64s(grad.data());
      channel.send(MessageType::kBackwardGrad, g.buffer());
    }

    ByteWriter params;
    params.f64(compute_s);
    for (std::size_t i = 0; i < secure.num_param_layers(); ++i) {
      write_tensor(params, secure.params(i).weights.value);
      write_tensor(params, secure.params(i).bias.value);
    }
    channel.send(MessageType::kParams, params.buffer());
    return 0;
  } catch (const BoundaryError&) {
    return 1;
  } catch (const std::exception& e) {
    report_error({WorkerError::Kind::kOther, 0, 0, e.what()});
    return 1;
  }
}

std::vector<CostReport> sweep_cuts(const Model& model, const Dataset& data,
                                   const TrainConfig& config, std::uint64_t budget_bytes,
                                   const PartitionOptions& options) {
  config.validate();
  std::vector<CostReport> reports;
  bool warm = false;
  bool blocked = false;
  for (std::size_t cut = model.num_layers(); cut-- > 0;) {
    const PartitionPlan plan{cut, budget_bytes, config.batch_size};
    CostReport report = describe_cut(model, plan);
    if (blocked || report.memory.total_bytes > budget_bytes) {
      report.skipped = true;
      report.skip_reason = blocked ? "a later cut already exceeds the budget"
                                   : "secure region needs " +
                                         std::to_string(report.memory.total_bytes) +
                                         " bytes, budget is " + std::to_string(budget_bytes);
      blocked = true;
      reports.push_back(report);
      continue;
    }
    if (!warm) {
      warm_up(model, data, config);
      warm = true;
    }
    time_cut(model, plan, data, config, options, report);
    reports.push_back(report);
  }
  return reports;
}

std::string cost_report_csv(const std::vector<CostReport>& reports) {
  std::ostringstream out;
  out << "cut_label,param_layers_secure,secure_bytes,copied_front_bytes,wall_monolithic_s,"
         "wall_partitioned_s,overhead_fraction,bytes_per_batch\n";
  for (const CostReport& r : reports) {
    out << r.cut_label << ',' << r.param_layers_secure << ',' << r.memory.total_bytes << ','
        << r.memory.copied_front_bytes() << ',';
    if (r.skipped) {
      out << ",,,\n";
      continue;
    }
    out << fixed(r.wall_monolithic_s) << ',' << fixed(r.wall_partitioned_s) << ','
        << fixed(r.overhead_fraction) << ',' << r.boundary_bytes_per_batch << '\n';
  }
  return out.str();
}

std::string cost_report_json(const std::vector<CostReport>& reports) {
  using nlohmann::ordered_json;
  ordered_json cuts = ordered_json::array();
  for (const CostReport& r : reports) {
    ordered_json layers = ordered_json::array();
    for (const SecureLayerBytes& l : r.memory.layers) {
      layers.push_back({{"position", l.position},
                        {"token", l.token},
                        {"params_bytes", l.params_bytes},
                        {"grads_bytes", l.grads_bytes},
                        {"momentum_bytes", l.momentum_bytes},
                        {"activation_bytes", l.activation_bytes}});
    }
    ordered_json copied = ordered_json::array();
    for (const CopiedLayer& c : r.memory.copied_front_layers) {
      copied.push_back({{"position", c.position}, {"token", c.token}, {"bytes", c.bytes}});
    }
    ordered_json j;
    j["cut_index"] = r.cut_index;
    j["cut_label"] = r.cut_label;
    j["param_layers_secure"] = r.param_layers_secure;
    j["memory"] = {{"layers", layers},
                   {"copied_front_layers", copied},
                   {"input_bytes", r.memory.input_bytes},
                   {"total_bytes", r.memory.total_bytes}};
    j["skipped"] = r.skipped;
    if (r.skipped) {
      j["skip_reason"] = r.skip_reason;
    } else {
      j["boundary_bytes_per_batch"] = r.boundary_bytes_per_batch;
      j["crossings_per_batch"] = r.crossings_per_batch;
      j["batches"] = r.batches;
      j["expected_boundary_bytes"] = r.expected_boundary_bytes;
      j["measured_boundary_bytes"] = r.measured_boundary_bytes;
      if (r.max_param_diff) j["max_param_diff"] = *r.max_param_diff;
    }
    cuts.push_back(std::move(j));
  }
  return ordered_json{{"cuts", cuts}}.dump(2) + "\n";
}

}  // namespace layerscope
