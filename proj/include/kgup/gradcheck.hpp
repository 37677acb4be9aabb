// Copyright 2026 The kgup Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kgup/tensor.hpp"

namespace kgup::ad {

struct GradCheckOptions {
  double eps = 2e-3;
  /// Coordinates sampled per parameter; 0 checks every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  /// Lower bound on the denominator of the relative error, so that
  /// parameters with a vanishing gradient are compared absolutely.
  double floor = 1e-2;
  /// When the extrapolated difference misses by more than this, the
  /// coordinate is also compared with the plain central and the one-sided
  /// second-order differences (kinks such as ReLU inside the probe interval).
  double kink_tolerance = 1e-3;
};

struct GradCheckReport {
  double max_error = 0.0;
  std::size_t coords = 0;
  std::size_t one_sided = 0;  // coordinates settled by a fallback estimate
  std::string worst;  // name of the parameter with the largest error
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Compares reverse-mode gradients of sum(f(tape) * R), R a fixed random
/// weighting, with central differences at eps and 2 eps combined by
/// Richardson extrapolation. `f` must be deterministic and
/// build its graph from `params`. The error is
/// max_i |a_i - n_i| / max(|a|_inf, |n|_inf, floor), taken over the checked
/// coordinates of all parameters together.
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& f, const NamedTensors& params,
                           const GradCheckOptions& options = {});

/// Single-input form: checks d f(x) / dx at `point`.
double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& point, double eps = 1e-3);

}  // namespace kgup::ad
