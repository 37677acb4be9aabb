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

#include "kgup/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "json.hpp"
#include "kgup/eval.hpp"

namespace kgup {

namespace {

using Snapshot = std::vector<std::vector<float>>;

Snapshot snapshot(const Model& model) {
  Snapshot out;
  for (const auto& [name, t] : model.params().all()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void restore(Model& model, const Snapshot& snap) {
  const auto& params = model.params().all();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = ad::Tensor(params[i].second).data();
    std::copy(snap[i].begin(), snap[i].end(), dst.begin());
  }
}

void write_log(std::ostream* log, const nlohmann::ordered_json& j) {
  if (log != nullptr) *log << j.dump() << '\n';
}

}  // namespace

std::vector<Transition> strided_subset(const std::vector<Transition>& transitions, std::size_t limit) {
  if (limit == 0 || limit >= transitions.size()) return transitions;
  std::vector<Transition> out;
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) out.push_back(transitions[i * transitions.size() / limit]);
  return out;
}

TrainResult train(Model& model, const std::vector<Transition>& train_set, const std::vector<Transition>& valid_set,
                  const TrainConfig& config, std::ostream* log) {
  if (config.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  TrainResult result;

  std::vector<const Transition*> usable;
  for (const auto& t : train_set) {
    if (render_sequence(t.gold_ops()).size() <= model.config().max_decode_len) {
      usable.push_back(&t);
    } else {
      ++result.skipped;
    }
  }
  if (usable.empty()) throw std::invalid_argument("no trainable transitions");
  const auto valid = strided_subset(valid_set, config.val_limit);

  ad::AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.clip_norm = config.clip_norm;
  ad::Adam adam(model.params().tensors(), adam_config);
  std::mt19937_64 rng(config.seed);

  Snapshot best;
  auto validate = [&](std::size_t epoch, float loss) {
    nlohmann::ordered_json j{{"step", result.steps}, {"epoch", epoch}, {"loss", loss}};
    if (!valid.empty()) {
      const double f1 = evaluate_tf(valid, model_generator(model), 1).f1;
      j["val_tf_f1"] = f1;
      if (f1 > result.best_val_tf) {
        result.best_val_tf = f1;
        result.best_step = result.steps;
        best = snapshot(model);
      }
    }
    write_log(log, j);
  };

  const float inv_batch = 1.0f / static_cast<float>(config.batch_size);
  bool done = false;
  for (std::size_t epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::shuffle(usable.begin(), usable.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t begin = 0; begin < usable.size(); begin += config.batch_size) {
      const std::size_t end = std::min(usable.size(), begin + config.batch_size);
      adam.zero_grad();
      float batch_loss = 0.0f;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& t = *usable[i];
        ad::Tape tape;
        auto loss = model.loss(tape, t);
        const float value = loss.item();
        if (!std::isfinite(value)) {
          throw NonFiniteLoss("non-finite loss " + std::to_string(value) + " at step " +
                              std::to_string(result.steps) + " on game " + std::to_string(t.game) + " step " +
                              std::to_string(t.step) + " branch " + std::to_string(t.branch) + " (action '" +
                              t.action + "')");
        }
        batch_loss += value;
        tape.backward(ad::scale(tape, loss, inv_batch));
      }
      // A short final batch keeps the 1/B scale so every example weighs the same.
      batch_loss /= static_cast<float>(end - begin);
      adam.step();
      ++result.steps;
      ++epoch_steps;
      epoch_loss += batch_loss;
      result.losses.push_back(batch_loss);
      write_log(log, {{"step", result.steps}, {"epoch", epoch}, {"loss", batch_loss}});
      if (config.eval_every != 0 && result.steps % config.eval_every == 0) validate(epoch, batch_loss);
      if (config.max_steps != 0 && result.steps >= config.max_steps) {
        done = true;
        break;
      }
    }
    validate(epoch, static_cast<float>(epoch_loss / static_cast<double>(std::max<std::size_t>(1, epoch_steps))));
  }

  result.optimizer = capture_optimizer(adam);
  if (!best.empty()) restore(model, best);
  return result;
}

}  // namespace kgup
