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

#include "kgup/eval.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "kgup/model.hpp"

namespace kgup {

namespace {

const std::set<std::string> kVerbs = {"look",    "go",    "open", "close", "take", "drop", "examine",
                                      "slice",   "chop",  "dice", "cook",  "prepare"};

// Runs fn(i) for i in [0, n) on `jobs` threads; results are written by index.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

BeliefGraph maybe_collapse(const BeliefGraph& g, bool collapse) {
  return collapse ? collapse_relations(g, collapsed_relation()) : g;
}

}  // namespace

double set_f1(std::size_t n_pred, std::size_t n_gold, std::size_t n_common) {
  if (n_pred == 0 && n_gold == 0) return 1.0;
  if (n_pred == 0 || n_gold == 0 || n_common == 0) return 0.0;
  const double p = static_cast<double>(n_common) / static_cast<double>(n_pred);
  const double r = static_cast<double>(n_common) / static_cast<double>(n_gold);
  return 2.0 * p * r / (p + r);
}

UpdateGenerator model_generator(const Model& model) {
  return [&model](const Transition& t, const BeliefGraph& graph) {
    return model.generate({&graph, t.action, t.observation});
  };
}

UpdateGenerator oracle_generator() {
  return [](const Transition& t, const BeliefGraph&) { return ParsedSequence{t.gold_ops(), 0}; };
}

CommandScore score_commands(const ParsedSequence& pred, const UpdateSequence& gold) {
  const std::set<UpdateOp> p(pred.ops.begin(), pred.ops.end());
  const std::set<UpdateOp> g(gold.begin(), gold.end());
  CommandScore s;
  s.pred = p.size() + pred.malformed;
  s.gold = g.size();
  for (const auto& op : p) s.common += g.contains(op);
  s.f1 = set_f1(s.pred, s.gold, s.common);
  return s;
}

std::string leading_verb(const std::string& action) {
  auto verb = action.substr(0, action.find(' '));
  return kVerbs.contains(verb) ? verb : "other";
}

std::map<std::string, double> group_by_verb(const std::vector<Transition>& transitions,
                                            const std::vector<double>& scores) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    auto& [sum, n] = acc[leading_verb(transitions[i].action)];
    sum += scores[i];
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [verb, sn] : acc) out[verb] = sn.first / static_cast<double>(sn.second);
  return out;
}

TfResult evaluate_tf(const std::vector<Transition>& transitions, const UpdateGenerator& generator, int jobs) {
  std::vector<CommandScore> scores(transitions.size());
  std::vector<std::size_t> malformed(transitions.size());
  parallel_for(transitions.size(), jobs, [&](std::size_t i) {
    const auto& t = transitions[i];
    auto pred = generator(t, t.g_seen_prev);
    scores[i] = score_commands(pred, t.gold_ops());
    malformed[i] = pred.malformed;
  });
  TfResult r;
  std::size_t pred = 0, gold = 0, common = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    r.per_transition.push_back(scores[i].f1);
    sum += scores[i].f1;
    pred += scores[i].pred;
    gold += scores[i].gold;
    common += scores[i].common;
    r.malformed += malformed[i];
    ++r.verb_counts[leading_verb(transitions[i].action)];
  }
  r.f1 = transitions.empty() ? 0.0 : sum / static_cast<double>(transitions.size());
  r.micro_f1 = set_f1(pred, gold, common);
  r.per_verb = group_by_verb(transitions, r.per_transition);
  return r;
}

FrResult evaluate_fr(const std::vector<Game>& games, const UpdateGenerator& generator, bool collapse, int jobs) {
  std::vector<std::vector<double>> curves(games.size());
  std::vector<std::size_t> malformed(games.size());
  parallel_for(games.size(), jobs, [&](std::size_t g) {
    BeliefGraph belief;
    for (const auto& t : games[g].on_path()) {
      auto pred = generator(t, belief);
      malformed[g] += pred.malformed;
      belief = apply_update(belief, pred.ops);
      const auto ours = maybe_collapse(belief, collapse);
      const auto gold = maybe_collapse(t.g_seen_next, collapse);
      curves[g].push_back(set_f1(ours.triples(), gold.triples()));
    }
  });
  FrResult r;
  double sum = 0.0;
  std::vector<std::pair<double, std::size_t>> steps;
  for (std::size_t g = 0; g < games.size(); ++g) {
    // a game without walkthrough steps keeps an empty belief against an empty graph
    double final_f1 = curves[g].empty() ? 1.0 : curves[g].back();
    r.per_game.push_back(final_f1);
    sum += final_f1;
    r.malformed += malformed[g];
    if (steps.size() < curves[g].size()) steps.resize(curves[g].size());
    for (std::size_t k = 0; k < curves[g].size(); ++k) {
      steps[k].first += curves[g][k];
      ++steps[k].second;
    }
  }
  r.f1 = games.empty() ? 0.0 : sum / static_cast<double>(games.size());
  for (const auto& [s, n] : steps) r.step_curve.push_back(s / static_cast<double>(n));
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = variant;
  j["transitions"] = transitions;
  j["games"] = games;
  if (tf) {
    j["tf_f1"] = micro ? tf->micro_f1 : tf->f1;
    j["tf_f1_mean"] = tf->f1;
    j["tf_f1_micro"] = tf->micro_f1;
    j["tf_malformed"] = tf->malformed;
    nlohmann::ordered_json verbs = nlohmann::ordered_json::object();
    for (const auto& [verb, f1] : tf->per_verb) {
      verbs[verb] = {{"tf_f1", f1}, {"count", tf->verb_counts.at(verb)}};
    }
    j["per_verb"] = verbs;
    if (verb_table) j["per_verb_table"] = per_verb_table(*tf);
  }
  if (fr) {
    j["fr_f1"] = fr->f1;
    j["fr_malformed"] = fr->malformed;
    j["fr_step_curve"] = fr->step_curve;
  }
  return j.dump(2) + "\n";
}

std::string per_verb_table(const TfResult& tf) {
  std::vector<std::pair<std::string, double>> rows(tf.per_verb.begin(), tf.per_verb.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::size_t width = 4;
  for (const auto& [verb, f1] : rows) width = std::max(width, verb.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "verb" << "  " << std::right << std::setw(6) << "count"
     << "  " << std::setw(6) << "TF-F1" << "\n";
  for (const auto& [verb, f1] : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << verb << "  " << std::right << std::setw(6)
       << tf.verb_counts.at(verb) << "  " << std::fixed << std::setprecision(3) << std::setw(6) << f1 << "\n";
  }
  return os.str();
}

}  // namespace kgup
