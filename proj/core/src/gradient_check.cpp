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

#include "layerscope/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "layerscope/errors.hpp"

namespace layerscope {

double gradient_check(const Objective& objective, std::span<const double> point,
                      std::span<const double> analytic, const GradientCheckOptions& options) {
  if (point.size() != analytic.size()) {
    throw ShapeError("gradient_check: point and analytic gradient differ in length");
  }
  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates != 0 && options.max_coordinates < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
  }

  std::vector<double> probe(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double original = probe[i];
    probe[i] = original + options.epsilon;
    const double plus = objective(probe);
    probe[i] = original - options.epsilon;
    const double minus = objective(probe);
    probe[i] = original;
    const double numeric = (plus - minus) / (2.0 * options.epsilon);
    const double error = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, error);
  }
  return worst;
}

}  // namespace layerscope
