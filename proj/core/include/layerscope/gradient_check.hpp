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

#ifndef LAYERSCOPE_GRADIENT_CHECK_HPP_
#define LAYERSCOPE_GRADIENT_CHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace layerscope {

struct GradientCheckOptions {
  double epsilon = 1e-4;
  // 0 checks every coordinate; otherwise a seeded random subset of this size.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

// Scalar objective evaluated at a perturbed copy of the point.
using Objective = std::function<double(std::span<const double>)>;

// Compares `analytic` (the gradient of `objective` at `point`) against
// central differences. Returns the maximum over checked coordinates of
// |analytic - numeric| / max(1, |analytic|).
double gradient_check(const Objective& objective, std::span<const double> point,
                      std::span<const double> analytic, const GradientCheckOptions& options = {});

}  // namespace layerscope

#endif  // LAYERSCOPE_GRADIENT_CHECK_HPP_
