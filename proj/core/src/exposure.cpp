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


#include "layerscope/exposure.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Dataset slice(const Dataset& data, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> indices(end - begin);
  std::iota(indices.begin(), indices.end(), begin);
  return data.subset(indices);
}

std::size_t first_dropout(const Model& model) {
  for (std::size_t pos = 0; pos < model.num_layers(); ++pos) {
    if (model.specs()[pos].kind == LayerKind::kDropout) return pos;
  }
  return model.num_layers();
}

// Inputs of layer `position` for S, T and X, computed once per fine-tune
// target. X is S followed by T, matching PrivateSplit::combined().
struct SplitView {
  Dataset s, t, x;
};

SplitView prefix_features(const Model& model, const PrivateSplit& split, std::size_t position) {
  SplitView v;
  v.x = features_at(model, split.combined(), position);
  const std::size_t ns = split.private_set.size();
  v.s = slice(v.x, 0, ns);
  v.t = slice(v.x, ns, v.x.size());
  return v;
}

std::vector<LayerSummary> layer_skeleton(const Model& model) {
  std::vector<LayerSummary> layers;
  for (std::size_t i = 0; i < num_exposure_layers(model); ++i) {
    const std::size_t pos = model.param_position(i);
    LayerSummary s;
    s.layer = i + 1;
    s.token = model.specs()[pos].token();
    s.neurons = neuron_count(model.specs()[pos], model.layer_output_shape(pos));
    layers.push_back(s);
  }
  return layers;
}

SeedRun run_seed(const std::vector<LayerSpec>& specs, const Dataset& x,
                 const ExposureConfig& config, std::uint64_t seed, const Dataset* test) {
  SeedRun run;
  run.seed = seed;
  const PrivateSplit split = split_private(x, seed);
  TrainConfig base = config.base_train;
  base.seed = seed;
  TrainResult trained;
  try {
    trained = train(init_model(specs, x.sample_shape(), seed), split.private_set, base,
                    std::vector<bool>(count_param_layers(specs), false));
  } catch (const DivergenceError& e) {
    run.error = e.what();
    run.cells.assign(num_exposure_layers(Model(specs, x.sample_shape(), seed)),
                     Cell{std::nullopt, "base training diverged"});
    return run;
  }
  if (!trained.history.empty()) run.final_epoch = trained.history.back();
  run.base_s = evaluate(trained.model, split.private_set);
  run.base_t = evaluate(trained.model, split.non_private_set);
  if (test != nullptr) run.base_test = evaluate(trained.model, *test);
  TrainConfig finetune = config.finetune;
  finetune.seed = seed;
  run.cells = measure_layers(trained.model, split, finetune, config.feature_cache,
                             config.feature_cache_bytes);
  return run;
}

nlohmann::ordered_json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},   {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"momentum", c.momentum}, {"seed", c.seed},           {"shuffle", c.shuffle}};
}

nlohmann::ordered_json stat_json(const Stat& s) {
  return {{"mean", s.mean}, {"ci_half_width", s.ci_half_width}, {"n", s.n}};
}

nlohmann::ordered_json evaluation_json(const Evaluation& e) {
  return {{"accuracy", e.accuracy}, {"mean_cost", e.mean_cost}};
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double generalization_error(const Model& model, const Dataset& s, const Dataset& t,
                            std::size_t start_position) {
  return evaluate(model, t, start_position).mean_cost -
         evaluate(model, s, start_position).mean_cost;
}

Model finetune_layer(const Model& model, std::size_t layer, const Dataset& data,
                     const TrainConfig& finetune, std::size_t start_position) {
  if (layer < 1 || layer > model.num_param_layers()) {
    throw std::out_of_range("layer " + std::to_string(layer) + " outside 1.." +
                            std::to_string(model.num_param_layers()));
  }
  std::vector<bool> mask(model.num_param_layers(), true);
  mask[layer - 1] = false;
  Model tuned = train(model, data, finetune, mask, start_position).model;
  tuned.set_freeze_mask(model.freeze_mask());
  return tuned;
}

Model make_ms(const Model& model, std::size_t layer, const Dataset& s,
              const TrainConfig& finetune) {
  return finetune_layer(model, layer, s, finetune);
}

Model make_mb(const Model& model, std::size_t layer, const Dataset& x,
              const TrainConfig& finetune) {
  return finetune_layer(model, layer, x, finetune);
}

std::size_t num_exposure_layers(const Model& model) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < model.num_param_layers(); ++i) {
    if (!model.specs()[model.param_position(i)].softmax_head) ++n;
  }
  return n;
}

Risk exposure_risk(double eps_s, double eps_b) {
  if (!(std::abs(eps_s) >= kUndefinedEpsS)) return {kNaN, true};
  return {(eps_s - eps_b) / eps_s, false};
}

std::size_t neuron_count(const LayerSpec& spec, const Shape& output_shape) {
  switch (spec.kind) {
    case LayerKind::kConv:
      return output_shape.at(0);
    case LayerKind::kFullyConnected:
      return spec.size;
    default:
      throw std::invalid_argument("neuron_count: layer " + spec.token() + " has no parameters");
  }
}

LayerExposure make_layer_exposure(std::size_t layer, double eps_s, double eps_b,
                                  std::size_t neurons) {
  const Risk r = exposure_risk(eps_s, eps_b);
  LayerExposure e;
  e.layer = layer;
  e.eps_s = eps_s;
  e.eps_b = eps_b;
  e.neurons = neurons;
  e.undefined = r.undefined;
  e.risk = r.value;
  e.risk_clamped = r.undefined ? kNaN : std::clamp(r.value, 0.0, 1.0);
  e.risk_per_neuron = e.risk_clamped / static_cast<double>(neurons);
  return e;
}

void ExposureConfig::validate() const {
  base_train.validate();
  finetune.validate();
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw std::invalid_argument("ci_level must be in (0, 1)");
  }
}

std::vector<Cell> measure_layers(const Model& model, const PrivateSplit& split,
                                 const TrainConfig& finetune, bool feature_cache,
                                 std::size_t feature_cache_bytes) {
  const std::size_t dropout_at = first_dropout(model);
  const Dataset x = split.combined();
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < num_exposure_layers(model); ++i) {
    const std::size_t pos = model.param_position(i);
    const std::size_t neurons = neuron_count(model.specs()[pos], model.layer_output_shape(pos));
    // Everything before `start` is frozen and deterministic, so its output
    // can be computed once instead of every batch.
    std::size_t start = std::min(pos, dropout_at);
    const std::size_t cache_bytes =
        2 * x.size() * shape_size(model.layer_input_shape(start)) * sizeof(double);
    if (!feature_cache || cache_bytes > feature_cache_bytes) start = 0;

    Cell cell;
    try {
      SplitView view;
      if (start > 0) {
        view = prefix_features(model, split, start);
      } else {
        view.s = split.private_set;
        view.t = split.non_private_set;
        view.x = x;
      }
      const Model ms = finetune_layer(model, i + 1, view.s, finetune, start);
      const double eps_s = generalization_error(ms, view.s, view.t, start);
      const Model mb = finetune_layer(model, i + 1, view.x, finetune, start);
      const double eps_b = generalization_error(mb, view.s, view.t, start);
      cell.value = make_layer_exposure(i + 1, eps_s, eps_b, neurons);
    } catch (const DivergenceError& e) {
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

Stat summarize(const std::vector<double>& values, double level) {
  Stat s;
  s.n = values.size();
  if (s.n == 0) {
    s.mean = kNaN;
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) return s;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(sq / static_cast<double>(s.n - 1));
  const boost::math::students_t dist(static_cast<double>(s.n - 1));
  const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
  s.ci_half_width = t * sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

void aggregate(ExposureReport& report) {
  report.ci_defined = report.runs.size() >= 2;
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    LayerSummary& layer = report.layers[i];
    std::vector<double> eps_s, eps_b, risk, risk_raw, per_neuron;
    layer.excluded_cells = layer.undefined_cells = layer.sign_anomalies = 0;
    for (const SeedRun& run : report.runs) {
      const Cell& cell = run.cells.at(i);
      if (!cell.value) {
        ++layer.excluded_cells;
        continue;
      }
      const LayerExposure& e = *cell.value;
      eps_s.push_back(e.eps_s);
      eps_b.push_back(e.eps_b);
      if (e.eps_s < e.eps_b) ++layer.sign_anomalies;
      if (e.undefined) {
        ++layer.undefined_cells;
        continue;
      }
      risk.push_back(e.risk_clamped);
      risk_raw.push_back(e.risk);
      per_neuron.push_back(e.risk_per_neuron);
    }
    const double level = report.config.ci_level;
    layer.eps_s = summarize(eps_s, level);
    layer.eps_b = summarize(eps_b, level);
    layer.risk = summarize(risk, level);
    layer.risk_raw = summarize(risk_raw, level);
    layer.risk_per_neuron = summarize(per_neuron, level);
  }
}

ExposureReport measure_all(const std::vector<LayerSpec>& specs, const Dataset& x,
                           const ExposureConfig& config, const Dataset* test) {
  config.validate();
  ExposureReport report;
  report.arch = format_arch(specs);
  report.dataset = x.name;
  report.dataset_size = x.size();
  report.config = config;
  report.layers = layer_skeleton(Model(specs, x.sample_shape(), 0));
  report.runs.resize(config.seeds.size());

  const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < config.seeds.size();) {
      try {
        report.runs[k] = run_seed(specs, x, config, config.seeds[k], test);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  aggregate(report);
  return report;
}

ExposureReport measure_model(const Model& model, const PrivateSplit& split,
                             const ExposureConfig& config, const Dataset* test) {
  config.validate();
  ExposureReport report;
  report.arch = model.arch();
  report.dataset = split.private_set.name;
  report.dataset_size = split.private_set.size() + split.non_private_set.size();
  report.config = config;
  report.config.seeds = {split.seed};
  report.layers = layer_skeleton(model);

  SeedRun run;
  run.seed = split.seed;
  run.base_s = evaluate(model, split.private_set);
  run.base_t = evaluate(model, split.non_private_set);
  if (test != nullptr) run.base_test = evaluate(model, *test);
  TrainConfig finetune = config.finetune;
  finetune.seed = split.seed;
  run.cells = measure_layers(model, split, finetune, config.feature_cache,
                             config.feature_cache_bytes);
  report.runs.push_back(std::move(run));
  aggregate(report);
  return report;
}

std::string report_json(const ExposureReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["arch"] = report.arch;
  j["dataset"] = report.dataset;
  j["dataset_size"] = report.dataset_size;
  j["config"] = {{"base_train", train_config_json(report.config.base_train)},
                 {"finetune", train_config_json(report.config.finetune)},
                 {"seeds", report.config.seeds},
                 {"repeats", report.config.seeds.size()},
                 {"ci_level", report.config.ci_level}};
  j["ci_defined"] = report.ci_defined;

  ordered_json layers = ordered_json::array();
  for (const LayerSummary& l : report.layers) {
    layers.push_back({{"layer", l.layer},
                      {"token", l.token},
                      {"neurons", l.neurons},
                      {"eps_s", stat_json(l.eps_s)},
                      {"eps_b", stat_json(l.eps_b)},
                      {"risk", stat_json(l.risk)},
                      {"risk_raw", stat_json(l.risk_raw)},
                      {"risk_per_neuron", stat_json(l.risk_per_neuron)},
                      {"excluded_cells", l.excluded_cells},
                      {"undefined_cells", l.undefined_cells},
                      {"sign_anomalies", l.sign_anomalies}});
  }
  j["layers"] = std::move(layers);

  ordered_json runs = ordered_json::array();
  for (const SeedRun& run : report.runs) {
    ordered_json r;
    r["seed"] = run.seed;
    if (!run.error.empty()) r["error"] = run.error;
    r["final_epoch"] = {{"mean_loss", run.final_epoch.mean_loss},
                        {"accuracy", run.final_epoch.accuracy}};
    r["base_s"] = evaluation_json(run.base_s);
    r["base_t"] = evaluation_json(run.base_t);
    if (run.base_test) r["base_test"] = evaluation_json(*run.base_test);
    ordered_json cells = ordered_json::array();
    for (std::size_t i = 0; i < run.cells.size(); ++i) {
      const Cell& c = run.cells[i];
      if (!c.value) {
        cells.push_back({{"layer", i + 1}, {"error", c.error}});
        continue;
      }
      const LayerExposure& e = *c.value;
      cells.push_back({{"layer", e.layer},
                       {"eps_s", e.eps_s},
                       {"eps_b", e.eps_b},
                       {"risk", e.risk},
                       {"risk_clamped", e.risk_clamped},
                       {"risk_per_neuron", e.risk_per_neuron},
                       {"undefined", e.undefined}});
    }
    r["cells"] = std::move(cells);
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  return j.dump(2) + "\n";
}

std::string report_csv(const ExposureReport& report) {
  std::ostringstream out;
  out << "dataset,layer,eps_s_mean,eps_s_ci,eps_b_mean,eps_b_ci,risk_mean,risk_ci,neurons,"
         "risk_per_neuron_mean,risk_per_neuron_ci,excluded_cells\n";
  for (const LayerSummary& l : report.layers) {
    out << report.dataset << ',' << l.layer << ',' << fmt(l.eps_s.mean) << ','
        << fmt(l.eps_s.ci_half_width) << ',' << fmt(l.eps_b.mean) << ','
        << fmt(l.eps_b.ci_half_width) << ',' << fmt(l.risk.mean) << ','
        << fmt(l.risk.ci_half_width) << ',' << l.neurons << ',' << fmt(l.risk_per_neuron.mean)
        << ',' << fmt(l.risk_per_neuron.ci_half_width) << ',' << l.excluded_cells << '\n';
  }
  return out.str();
}

}  // namespace layerscope
