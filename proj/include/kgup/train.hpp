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
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "kgup/checkpoint.hpp"
#include "kgup/model.hpp"
#include "kgup/world.hpp"

namespace kgup {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  float lr = 1e-3f;
  float clip_norm = 5.0f;
  std::uint64_t seed = 0;
  /// Validation transitions scored per evaluation, evenly strided over the
  /// validation split; 0 scores all of them.
  std::size_t val_limit = 300;
  /// Stop after this many optimizer steps; 0 means no limit.
  std::size_t max_steps = 0;
  /// Validate every this many steps in addition to each epoch end; 0 means
  /// epoch ends only.
  std::size_t eval_every = 0;
};

struct TrainResult {
  std::size_t steps = 0;
  /// Transitions dropped because their target exceeds max_decode_len.
  std::size_t skipped = 0;
  std::vector<float> losses;  // mean batch loss per step
  double best_val_tf = -1.0;  // -1 when there was no validation data
  std::size_t best_step = 0;
  OptimizerState optimizer;
};

/// Mini-batch Adam with teacher forcing on the ground-truth prior graph.
/// Writes one JSON object per line to `log`: every step
/// {"step", "epoch", "loss"} and after each validation also "val_tf_f1".
/// With validation data the parameters of the best validation score are
/// restored at the end. Throws NonFiniteLoss.
TrainResult train(Model& model, const std::vector<Transition>& train_set, const std::vector<Transition>& valid_set,
                  const TrainConfig& config, std::ostream* log = nullptr);

/// Up to `limit` transitions evenly strided over `transitions` (all when
/// limit is 0 or not smaller than the size).
std::vector<Transition> strided_subset(const std::vector<Transition>& transitions, std::size_t limit);

}  // namespace kgup
