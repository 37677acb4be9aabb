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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kgup/command.hpp"
#include "kgup/graph.hpp"
#include "kgup/world.hpp"

namespace kgup {

class Model;

/// F1 from set sizes. Both sets empty scores 1, exactly one empty scores 0.
double set_f1(std::size_t n_pred, std::size_t n_gold, std::size_t n_common);

template <typename T>
double set_f1(const std::set<T>& pred, const std::set<T>& gold) {
  std::size_t common = 0;
  for (const auto& x : pred) common += gold.contains(x);
  return set_f1(pred.size(), gold.size(), common);
}

/// Produces the update for a transition given the graph the model sees
/// (ground truth for teacher forcing, its own belief for free run).
using UpdateGenerator = std::function<ParsedSequence(const Transition& t, const BeliefGraph& graph)>;

UpdateGenerator model_generator(const Model& model);
/// Replays the gold diff of each transition.
UpdateGenerator oracle_generator();

/// Command-level F1 of one prediction; malformed segments count as wrong
/// predictions.
struct CommandScore {
  std::size_t pred = 0;
  std::size_t gold = 0;
  std::size_t common = 0;
  double f1 = 0.0;
};
CommandScore score_commands(const ParsedSequence& pred, const UpdateSequence& gold);

/// Leading verb of an action, or "other" outside the action grammar.
std::string leading_verb(const std::string& action);

struct TfResult {
  double f1 = 0.0;        // mean over transitions
  double micro_f1 = 0.0;  // pooled command counts
  std::vector<double> per_transition;
  std::map<std::string, double> per_verb;
  std::map<std::string, std::size_t> verb_counts;
  std::size_t malformed = 0;
};

TfResult evaluate_tf(const std::vector<Transition>& transitions, const UpdateGenerator& generator, int jobs = 1);

/// Mean per-transition score within each verb group.
std::map<std::string, double> group_by_verb(const std::vector<Transition>& transitions,
                                            const std::vector<double>& scores);

struct FrResult {
  double f1 = 0.0;  // mean over games of the final-graph F1
  std::vector<double> per_game;
  /// Mean F1 of the belief against G_seen after each step, over games that
  /// reach that step.
  std::vector<double> step_curve;
  std::size_t malformed = 0;
};

/// Runs each game's walkthrough chain from an empty belief. With `collapse`,
/// both graphs are compared with relations collapsed.
FrResult evaluate_fr(const std::vector<Game>& games, const UpdateGenerator& generator, bool collapse, int jobs = 1);

struct EvalReport {
  std::string variant;
  std::size_t transitions = 0;
  std::size_t games = 0;
  /// Headline tf_f1 is the micro average instead of the per-transition mean.
  bool micro = false;
  /// Also embed the aligned per-verb table as text.
  bool verb_table = false;
  std::optional<TfResult> tf;
  std::optional<FrResult> fr;

  std::string to_json() const;
};

/// Aligned-column per-verb table, one row per verb sorted by score.
std::string per_verb_table(const TfResult& tf);

}  // namespace kgup
