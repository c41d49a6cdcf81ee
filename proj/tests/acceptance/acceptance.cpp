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

// Release acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any selected criterion fails.
//
//   layerscope_acceptance [--criteria 1,2,...] [--mnist-dir DIR]
//
// Criterion 6 trains on full MNIST for hours; it reads the dataset from
// $LAYERSCOPE_MNIST_DIR (a directory holding dataset.json or the four IDX
// files under their usual names).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "kernel_checks.hpp"
#include "layerscope/arch.hpp"
#include "layerscope/dataset.hpp"
#include "layerscope/enclave.hpp"
#include "layerscope/errors.hpp"
#include "layerscope/exposure.hpp"
#include "layerscope/train.hpp"

namespace layerscope {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

fs::path g_mnist_dir;

// Gradients ----------------------------------------------------------------

Outcome gradients() {
  constexpr int kInstances = 20;
  constexpr double kTolerance = 1e-5;
  Outcome o{true, ""};
  for (const testing::KernelCheck& check : testing::gradient_checks()) {
    double worst = 0.0;
    for (int i = 0; i < kInstances; ++i) worst = std::max(worst, check.run(1000 + i));
    if (!(worst <= kTolerance)) o.pass = false;
    o.detail += format("%s %.1e; ", check.name.c_str(), worst);
  }
  o.detail += format("%d instances each, tolerance %.0e", kInstances, kTolerance);
  return o;
}

Outcome oracles() {
  constexpr double kTolerance = 1e-12;
  Outcome o{true, ""};
  for (const testing::KernelCheck& check : testing::oracle_checks()) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) worst = std::max(worst, check.run(2000 + i));
    if (!(worst <= kTolerance)) o.pass = false;
    o.detail += format("%s %.1e; ", check.name.c_str(), worst);
  }
  o.detail += "tolerance 1e-12";
  return o;
}

// Risk identities ----------------------------------------------------------

Outcome identities() {
  std::size_t checked = 0, bad = 0;
  auto expect = [&](bool ok) {
    ++checked;
    bad += !ok;
  };
  for (double e : {1e-8, 1e-3, 0.25, 1.0, 3.7, 1e5}) {
    expect(exposure_risk(e, e).value == 0.0 && !exposure_risk(e, e).undefined);
    expect(exposure_risk(e, 0.0).value == 1.0);
    // eps_b as a fraction of eps_s keeps the risk near [0, 1], where 1e-12
    // is resolvable; scaled eps_s stays clear of the undefined band.
    for (double fraction : {0.0, 0.1, 0.45, -0.4, 0.93, 2.5}) {
      for (double c : {1e-4, 0.3, 9.0, 1e7}) {
        if (c * e < 10 * kUndefinedEpsS) continue;
        const double b = fraction * e;
        expect(std::abs(exposure_risk(c * e, c * b).value - exposure_risk(e, b).value) <= 1e-12);
      }
    }
  }
  for (double tiny : {0.0, 1e-12, -1e-12, 9.9e-10, -9.9e-10}) {
    const Risk r = exposure_risk(tiny, 0.3);
    expect(r.undefined && std::isnan(r.value));
    expect(make_layer_exposure(1, tiny, 0.3, 4).undefined);
  }
  expect(!exposure_risk(1.1e-9, 0.0).undefined);
  return {bad == 0, format("%zu/%zu identity checks hold", checked - bad, checked)};
}

// Zero-epoch identity ------------------------------------------------------

Outcome zero_epoch() {
  const Dataset data = gen_synthetic(testing::small_blobs_spec(21));
  const PrivateSplit split = split_private(data, 3);
  const Model init = init_model(parse_arch("4C3-MP-D25-8FC-4SM"), {1, 8, 8}, 3);
  TrainConfig base;
  base.epochs = 3;
  base.batch_size = 32;
  const Model m = train(init, split.private_set, base, init.freeze_mask()).model;
  TrainConfig ft = finetune_defaults();
  ft.epochs = 0;
  std::size_t bad = 0, zero = 0, undefined = 0;
  for (std::size_t l = 1; l <= m.num_param_layers(); ++l) {
    bad += !bitwise_equal(make_ms(m, l, split.private_set, ft), m);
    bad += !bitwise_equal(make_mb(m, l, split.combined(), ft), m);
  }
  for (const Cell& c : measure_layers(m, split, ft)) {
    if (!c.value) {
      ++bad;
    } else if (c.value->undefined) {
      ++undefined;
    } else if (c.value->risk == 0.0 && c.value->eps_s == c.value->eps_b) {
      ++zero;
    } else {
      ++bad;
    }
  }
  return {bad == 0, format("M_s == M_b == M bitwise for %zu layers; risk exactly 0 in %zu cells, "
                           "undefined in %zu",
                           m.num_param_layers(), zero, undefined)};
}

// Exposure trends ----------------------------------------------------------

Dataset load_dir(const fs::path& dir, std::optional<Dataset>* test = nullptr) {
  DatasetDescriptor d;
  if (fs::exists(dir / "dataset.json")) {
    d = load_descriptor(dir / "dataset.json");
  } else {
    d.name = "mnist";
    d.format = "idx";
    d.train_images = dir / "train-images-idx3-ubyte";
    d.train_labels = dir / "train-labels-idx1-ubyte";
    d.test_images = dir / "t10k-images-idx3-ubyte";
    d.test_labels = dir / "t10k-labels-idx1-ubyte";
  }
  LoadedData loaded = load_dataset(d);
  if (test) *test = std::move(loaded.test);
  return std::move(loaded.train);
}

std::vector<LayerSpec> vgg7() { return with_dropout_before_fc(parse_arch(kVgg7Arch), 0.5); }

// 1-based index of the last conv among the parameterized layers.
std::size_t last_conv_layer(const std::vector<LayerSpec>& specs) {
  std::size_t index = 0, last = 0;
  for (const LayerSpec& s : specs) {
    if (!s.has_params()) continue;
    ++index;
    if (s.kind == LayerKind::kConv) last = index;
  }
  return last;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome trend() {
  if (g_mnist_dir.empty()) return {false, "no --mnist-dir given"};
  const auto start = std::chrono::steady_clock::now();
  const Dataset data = load_dir(g_mnist_dir);
  ExposureConfig c;
  c.base_train.epochs = 10;
  c.finetune.epochs = 5;
  c.seeds = {0, 1, 2, 3, 4};
  c.threads = std::max(1u, std::thread::hardware_concurrency());  // results do not depend on it
  const std::vector<LayerSpec> specs = vgg7();
  const ExposureReport r = measure_all(specs, data, c);
  const std::size_t last = last_conv_layer(specs);

  std::size_t seeds_ok = 0, cells = 0, ordered = 0;
  std::string per_seed;
  for (const SeedRun& run : r.runs) {
    const Cell& first = run.cells.at(0);
    const Cell& last_cell = run.cells.at(last - 1);
    const bool usable = first.value && last_cell.value && !first.value->undefined &&
                        !last_cell.value->undefined;
    if (usable && last_cell.value->risk > first.value->risk) ++seeds_ok;
    per_seed += usable ? format("%.3f>%.3f ", last_cell.value->risk, first.value->risk)
                       : std::string("n/a ");
    for (const Cell& cell : run.cells) {
      if (cell.value) {
        ++cells;
        ordered += cell.value->eps_s >= cell.value->eps_b;
      }
    }
  }
  const std::size_t total_cells = r.runs.size() * r.runs.front().cells.size();
  const double fraction = static_cast<double>(ordered) / static_cast<double>(total_cells);
  const bool pass = seeds_ok >= 4 && fraction >= 0.9;
  return {pass, format("%zu images; (a) last-conv risk > first-conv risk in %zu/5 seeds [%s]; "
                       "(b) eps_s >= eps_b in %zu/%zu cells (%.0f%%, %zu measured); %.0f s",
                       data.size(), seeds_ok, per_seed.c_str(), ordered, total_cells,
                       100.0 * fraction, cells, seconds_since(start))};
}

Outcome full_scale() {
  const char* dir = std::getenv("LAYERSCOPE_MNIST_DIR");
  if (!dir || !*dir) return {false, "not run: LAYERSCOPE_MNIST_DIR is unset"};
  std::optional<Dataset> test;
  const Dataset data = load_dir(dir, &test);
  if (!test) return {false, "not run: no MNIST test split found"};
  ExposureConfig c;
  c.base_train.epochs = 20;
  c.finetune.epochs = 10;
  const std::vector<LayerSpec> specs = vgg7();
  const ExposureReport r = measure_all(specs, data, c, &*test);
  double worst_accuracy = 1.0;
  for (const SeedRun& run : r.runs) {
    worst_accuracy = std::min(worst_accuracy, run.base_test ? run.base_test->accuracy : 0.0);
  }
  const double risk = r.layers.at(last_conv_layer(specs) - 1).risk.mean;
  return {worst_accuracy >= 0.99 && risk >= 0.45 && risk <= 0.80,
          format("lowest test accuracy %.4f (need >= 0.99); last-conv mean risk %.3f (need "
                 "[0.45, 0.80])",
                 worst_accuracy, risk)};
}

// Partitioning -------------------------------------------------------------

PartitionOptions tool_options() {
  PartitionOptions o;
  o.worker_executable = LAYERSCOPE_TOOL_PATH;
  o.repeats = 1;
  return o;
}

Outcome partition_equivalence() {
  const Dataset data = gen_synthetic(testing::small_blobs_spec(5)).head(128);
  const Model m = init_model(parse_arch("4C3-MP-D25-8FC-4SM"), {1, 8, 8}, 8);
  TrainConfig config;
  config.epochs = 3;
  config.batch_size = 32;
  const Model reference = train(m, data, config, m.freeze_mask()).model;
  std::size_t cuts = 0, equal = 0;
  double worst = 0.0;
  for (std::size_t cut = 0; cut < m.num_layers(); ++cut) {
    PartitionPlan plan;
    plan.cut_index = cut;
    plan.batch_size = config.batch_size;
    const PartitionResult r = run_partitioned_training(m, plan, data, config, tool_options());
    ++cuts;
    equal += bitwise_equal(r.model, reference);
    worst = std::max(worst, max_param_diff(r.model, reference));
  }
  return {cuts >= 3 && equal == cuts && worst <= 1e-12,
          format("%zu/%zu cuts bitwise equal to monolithic training, max diff %.1e", equal, cuts,
                 worst)};
}

Outcome memory_rules() {
  std::vector<std::string> failures;
  const Model vgg = init_model(vgg7(), {1, 28, 28}, 0);

  // Copy rule: a parameterless front pulls in the parameterized layer before it.
  std::size_t copy_checks = 0;
  for (std::size_t cut = 1; cut < vgg.num_layers(); ++cut) {
    if (vgg.specs()[cut].has_params()) continue;
    std::size_t front = cut;
    while (!vgg.specs()[front].has_params()) --front;
    const LayerParams& p = vgg.params(*vgg.param_index(front));
    const std::uint64_t expected = (p.weights.value.size() + p.bias.value.size()) * 8;
    PartitionPlan plan;
    plan.cut_index = cut;
    const MemoryAccount a = account_memory(vgg, plan);
    ++copy_checks;
    if (a.copied_front_bytes() != expected || a.copied_front_layers.size() != 1 ||
        a.copied_front_layers[0].position != front) {
      failures.push_back(format("copy rule at %zu", cut));
    }
  }

  // Over-budget plans never reach the worker: a missing executable would
  // surface as a boundary error instead.
  std::size_t rejected = 0;
  {
    const Dataset tiny = gen_synthetic({10, 13, {1, 28, 28}, 1.0, 3, 0.1});
    TrainConfig config;
    config.epochs = 1;
    PartitionOptions o = tool_options();
    o.worker_executable = "/nonexistent/layerscope-worker";
    for (std::size_t cut = 0; cut < vgg.num_layers(); ++cut) {
      PartitionPlan plan;
      plan.cut_index = cut;
      if (account_memory(vgg, plan).total_bytes <= plan.budget_bytes) continue;
      try {
        run_partitioned_training(vgg, plan, tiny, config, o);
        failures.push_back(format("cut %zu accepted", cut));
      } catch (const BudgetError&) {
        ++rejected;
      } catch (const std::exception& e) {
        failures.push_back(format("cut %zu: %s", cut, e.what()));
      }
    }
  }
  if (rejected == 0) failures.push_back("no over-budget cut to reject");

  // The sweep on MNIST.
  if (g_mnist_dir.empty()) return {false, "no --mnist-dir given"};
  const Dataset data = load_dir(g_mnist_dir).head(512);
  TrainConfig config;
  config.epochs = 1;
  const std::vector<CostReport> reports =
      sweep_cuts(vgg, data, config, kDefaultBudgetBytes, tool_options());
  std::set<std::size_t> param_cuts;
  std::size_t feasible = 0;
  double min_overhead = 1e300, max_overhead = -1e300;
  for (const CostReport& r : reports) {
    if (r.skipped) continue;
    ++feasible;
    param_cuts.insert(r.param_layers_secure);
    min_overhead = std::min(min_overhead, r.overhead_fraction);
    max_overhead = std::max(max_overhead, r.overhead_fraction);
    if (!(r.overhead_fraction >= 0.0)) failures.push_back("negative overhead at " + r.cut_label);
    if (r.measured_boundary_bytes != r.expected_boundary_bytes) {
      failures.push_back("boundary byte mismatch at " + r.cut_label);
    }
  }
  const std::size_t deepest = param_cuts.empty() ? 0 : *param_cuts.rbegin();
  if (deepest < 4) failures.push_back(format("only %zu parameterized layers fit", deepest));

  std::string detail =
      format("copy rule holds at %zu parameterless cuts; %zu over-budget plans rejected before "
             "spawn; sweep: %zu feasible cuts reaching %zu parameterized layers, overhead "
             "%.4f..%.4f",
             copy_checks, rejected, feasible, deepest, min_overhead, max_overhead);
  for (const std::string& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// Determinism --------------------------------------------------------------

int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(LAYERSCOPE_TOOL_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// The three wall-clock columns of partition.csv are the only timing data in
// any output.
std::string mask_wall_columns(const std::string& csv) {
  static const std::regex wall(R"(,[0-9.]+,[0-9.]+,-?[0-9.]+,([0-9]+)\n)");
  return std::regex_replace(csv, wall, ",W,W,W,$1\n");
}

std::string mask_wall_fields(const std::string& json) {
  static const std::regex wall(
      R"re("(wall_monolithic_s|wall_partitioned_s|boundary_s|overhead_fraction)": [-0-9.e+]+)re");
  return std::regex_replace(json, wall, "\"$1\": W");
}

Outcome determinism() {
  TempDir dir("layerscope-accept");
  {
    std::ofstream out(dir / "syn.json");
    out << R"({"name":"synthetic","format":"synthetic","num_classes":4,"per_class":24,)"
        << R"("image_shape":[1,8,8],"margin":1.5,"seed":5,"test_per_class":6})";
  }
  const std::string common = "--dataset " + (dir / "syn.json").string() +
                             " --arch 4C3-MP-8FC-4SM --batch 16 --epochs 2";
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "train " + common},
      {"exposure", "exposure " + common + " --ft-epochs 2 --seeds 1,2,3"},
      {"partition", "partition " + common + " --repeats 1 --verify"},
  };
  std::size_t files = 0;
  std::vector<std::string> failures;
  for (const auto& [name, args] : commands) {
    const fs::path first = dir / name, again = dir / (name + "-replay");
    if (run_tool(args + " --out " + first.string(), dir / "log.txt") != 0) {
      failures.push_back(name + " failed: " + testing::read_text(dir / "log.txt"));
      continue;
    }
    if (run_tool("replay --manifest " + (first / "manifest.json").string() + " --out " +
                     again.string(),
                 dir / "log.txt") != 0) {
      failures.push_back(name + " replay failed: " + testing::read_text(dir / "log.txt"));
      continue;
    }
    for (const auto& entry : fs::directory_iterator(first)) {
      const std::string file = entry.path().filename();
      if (file == "manifest.json") continue;
      std::string a = testing::read_text(entry.path());
      std::string b = fs::exists(again / file) ? testing::read_text(again / file) : "<missing>";
      if (file == "partition.csv") {
        a = mask_wall_columns(a);
        b = mask_wall_columns(b);
      } else if (file == "partition.json") {
        a = mask_wall_fields(a);
        b = mask_wall_fields(b);
      }
      ++files;
      if (a != b) failures.push_back(name + "/" + file + " differs");
    }
  }
  std::string detail = format("%zu output files identical on replay (wall-clock timings masked)",
                              files - std::min(files, failures.size()));
  for (const std::string& f : failures) detail += "; " + f;
  return {failures.empty() && files >= 6, detail};
}

// Loaders ------------------------------------------------------------------

std::optional<LoadError::Kind> idx_error(const testing::MalformedFixture& f, const TempDir& dir) {
  testing::write_bytes(dir / "img", f.images);
  testing::write_bytes(dir / "lbl", f.labels);
  try {
    load_idx(dir / "img", dir / "lbl");
  } catch (const LoadError& e) {
    return e.kind();
  }
  return std::nullopt;
}

std::optional<LoadError::Kind> cifar_error(const testing::MalformedFixture& f,
                                           const TempDir& dir) {
  testing::write_bytes(dir / "batch", f.images);
  const fs::path paths[] = {dir / "batch"};
  try {
    load_cifar10(paths);
  } catch (const LoadError& e) {
    return e.kind();
  }
  return std::nullopt;
}

Outcome formats() {
  TempDir dir("layerscope-accept");
  std::vector<std::string> failures;

  testing::write_bytes(dir / "img", testing::golden_idx_images());
  testing::write_bytes(dir / "lbl", testing::golden_idx_labels());
  const Dataset idx = load_idx(dir / "img", dir / "lbl");
  for (std::size_t n = 0; n < 2; ++n) {
    if (idx.labels[n] != testing::kGoldenLabels[n]) failures.push_back("idx label");
    for (std::size_t i = 0; i < 6; ++i) {
      if (idx.images[n * 6 + i] != testing::kGoldenPixels[n][i] / 255.0) {
        failures.push_back("idx pixel");
      }
    }
  }

  testing::Bytes batch = testing::cifar_record(3, 1);
  const testing::Bytes second = testing::cifar_record(9, 2);
  batch.insert(batch.end(), second.begin(), second.end());
  testing::write_bytes(dir / "batch", batch);
  const fs::path paths[] = {dir / "batch"};
  const Dataset cifar = load_cifar10(paths);
  if (cifar.size() != 2 || cifar.labels[0] != 3 || cifar.labels[1] != 9) {
    failures.push_back("cifar labels");
  }
  for (std::size_t n = 0; n < cifar.size(); ++n) {
    for (std::size_t i = 1; i < kCifarRecordBytes; ++i) {
      if (cifar.images[n * (kCifarRecordBytes - 1) + i - 1] !=
          batch[n * kCifarRecordBytes + i] / 255.0) {
        failures.push_back("cifar pixel");
        break;
      }
    }
  }

  std::set<LoadError::Kind> kinds;
  auto check = [&](const testing::MalformedFixture& f, std::optional<LoadError::Kind> got,
                   const char* loader) {
    if (got != f.expected) {
      failures.push_back(format("%s %s: got %s", loader, f.name.c_str(),
                                got ? to_string(*got) : "accepted"));
    }
    if (got) kinds.insert(*got);
  };
  for (const auto& f : testing::malformed_idx_fixtures()) check(f, idx_error(f, dir), "idx");
  for (const auto& f : testing::malformed_cifar_fixtures()) check(f, cifar_error(f, dir), "cifar");
  const std::set<LoadError::Kind> required = {
      LoadError::Kind::kBadMagic, LoadError::Kind::kTruncated, LoadError::Kind::kCountMismatch,
      LoadError::Kind::kBadRecordLength, LoadError::Kind::kLabelOutOfRange};
  for (LoadError::Kind k : required) {
    if (!kinds.contains(k)) failures.push_back(std::string("never raised ") + to_string(k));
  }

  std::string detail = format("golden IDX and CIFAR fixtures decode exactly; %zu distinct error "
                              "kinds across malformed fixtures",
                              kinds.size());
  for (const std::string& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>>& criteria() {
  static const std::map<int, std::pair<const char*, std::function<Outcome()>>> table = {
      {1, {"gradient correctness", gradients}},
      {2, {"oracle equivalence", oracles}},
      {3, {"risk identities", identities}},
      {4, {"zero-epoch identity", zero_epoch}},
      {5, {"exposure trend on MNIST-8k", trend}},
      {6, {"full-scale MNIST", full_scale}},
      {7, {"partitioned training equivalence", partition_equivalence}},
      {8, {"memory accounting and budget", memory_rules}},
      {9, {"replay determinism", determinism}},
      {10, {"loader robustness", formats}},
  };
  return table;
}

int run(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criteria" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) selected.push_back(std::stoi(item));
    } else if (arg == "--mnist-dir" && i + 1 < argc) {
      g_mnist_dir = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--criteria 1,2,...] [--mnist-dir DIR]\n", argv[0]);
      return 2;
    }
  }
  if (selected.empty()) {
    for (const auto& [id, entry] : criteria()) selected.push_back(id);
  }

  int failed = 0;
  for (int id : selected) {
    const auto it = criteria().find(id);
    if (it == criteria().end()) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id,
                it->second.first, o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace layerscope

int main(int argc, char** argv) { return layerscope::run(argc, argv); }
