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

#include "kgup/optim.hpp"

#include <cmath>

namespace kgup::ad {

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0f);
    v_.emplace_back(p.size(), 0.0f);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

float Adam::step() {
  double sq = 0.0;
  for (const auto& p : params_) {
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  }
  auto norm = static_cast<float>(std::sqrt(sq));
  float factor = 1.0f;
  if (config_.clip_norm > 0.0f && norm > config_.clip_norm) factor = config_.clip_norm / norm;

  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), static_cast<double>(t_));
  const auto step_size = static_cast<float>(config_.lr / bc1);
  const auto inv_bc2 = static_cast<float>(1.0 / bc2);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    // A parameter that never received a gradient steps with g = 0, so the
    // update does not depend on which tensors a backward pass happened to touch.
    auto grad = params_[k].grad_mut();
    auto value = params_[k].data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      float g = grad[i] * factor;
      m[i] = config_.beta1 * m[i] + (1.0f - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0f - config_.beta2) * g * g;
      value[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + config_.eps);
    }
  }
  return norm;
}

}  // namespace kgup::ad
