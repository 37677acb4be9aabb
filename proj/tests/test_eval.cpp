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

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "kgup/dataset.hpp"
#include "kgup/eval.hpp"

using namespace kgup;

namespace {

// Independent scorer: plain nested-loop counting over rendered command strings.
double naive_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  std::vector<std::string> p, g;
  for (const auto& x : pred) {
    if (std::find(p.begin(), p.end(), x) == p.end()) p.push_back(x);
  }
  for (const auto& x : gold) {
    if (std::find(g.begin(), g.end(), x) == g.end()) g.push_back(x);
  }
  if (p.empty() && g.empty()) return 1.0;
  double hits = 0;
  for (const auto& x : p) {
    for (const auto& y : g) hits += x == y ? 1.0 : 0.0;
  }
  if (hits == 0) return 0.0;
  double precision = hits / p.size(), recall = hits / g.size();
  return 2 * precision * recall / (precision + recall);
}

std::vector<std::string> rendered(const UpdateSequence& ops) {
  std::vector<std::string> out;
  for (const auto& op : ops) out.push_back(render_op(op));
  return out;
}

std::vector<std::string> rendered(const BeliefGraph& g) {
  std::vector<std::string> out;
  for (const auto& t : g.triples()) out.push_back(t.head.label + "|" + t.tail.label + "|" + t.relation.label());
  return out;
}

const std::vector<std::string> kNames = {"player", "shed", "backyard", "toolbox", "red apple", "knife"};
const std::vector<std::string> kRels = {"at", "in", "on", "is", "west_of"};

UpdateOp random_op(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n(0, kNames.size() - 1), r(0, kRels.size() - 1);
  std::bernoulli_distribution add(0.7);
  const auto& h = kNames[n(rng)];
  const auto& t = kNames[n(rng)];
  const auto& rel = kRels[r(rng)];
  return add(rng) ? add_op(h, t, rel) : delete_op(h, t, rel);
}

UpdateSequence random_ops(std::mt19937_64& rng, int max_len) {
  std::uniform_int_distribution<int> len(0, max_len);
  UpdateSequence ops;
  for (int i = len(rng); i > 0; --i) ops.push_back(random_op(rng));
  return ops;
}

// Transitions whose gold diff is `gold`.
Transition with_gold(const UpdateSequence& gold, std::int64_t game = 0, std::int64_t step = 0) {
  Transition t;
  t.game = game;
  t.step = step;
  t.action = "look";
  t.g_seen_next = apply_update({}, gold);
  return t;
}

}  // namespace

TEST_CASE("set_f1 examples") {
  CHECK(set_f1(std::set<int>{1, 2}, std::set<int>{1, 2}) == 1.0);
  CHECK(set_f1(std::set<int>{1, 2}, std::set<int>{2, 3}) == doctest::Approx(0.5));
  CHECK(set_f1(std::set<int>{}, std::set<int>{}) == 1.0);
  CHECK(set_f1(std::set<int>{1}, std::set<int>{}) == 0.0);
  CHECK(set_f1(std::set<int>{}, std::set<int>{1}) == 0.0);
  CHECK(set_f1(std::set<int>{1, 2, 3}, std::set<int>{4}) == 0.0);
}

TEST_CASE("set_f1 is symmetric and bounded") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> v(0, 6), n(0, 5);
  for (int i = 0; i < 200; ++i) {
    std::set<int> a, b;
    for (int k = n(rng); k > 0; --k) a.insert(v(rng));
    for (int k = n(rng); k > 0; --k) b.insert(v(rng));
    const double ab = set_f1(a, b);
    CHECK(ab == set_f1(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK((ab == 1.0) == (a == b));
  }
}

TEST_CASE("command scoring counts malformed segments as misses") {
  UpdateSequence gold{add_op("a", "b", "in"), add_op("c", "d", "on")};
  ParsedSequence one_wrong{{add_op("a", "b", "in"), add_op("c", "x", "on")}, 0};
  CHECK(score_commands(one_wrong, gold).f1 == doctest::Approx(0.5));
  ParsedSequence with_junk{{add_op("a", "b", "in"), add_op("c", "d", "on")}, 2};
  auto s = score_commands(with_junk, gold);
  CHECK(s.pred == 4);
  CHECK(s.common == 2);
  CHECK(s.f1 == doctest::Approx(2.0 * 0.5 * 1.0 / 1.5));
  CHECK(score_commands({{}, 1}, {}).f1 == 0.0);
  CHECK(score_commands({{}, 0}, {}).f1 == 1.0);
}

TEST_CASE("teacher-forced F1 examples") {
  std::vector<Transition> half{with_gold({}), with_gold({add_op("a", "b", "in")}), with_gold({}),
                               with_gold({add_op("c", "d", "on")})};
  UpdateGenerator silent = [](const Transition&, const BeliefGraph&) { return ParsedSequence{}; };
  CHECK(evaluate_tf(half, silent).f1 == doctest::Approx(0.5));
  CHECK(evaluate_tf(half, oracle_generator()).f1 == 1.0);
  CHECK(evaluate_tf(half, oracle_generator()).micro_f1 == 1.0);

  auto t = fixtures::shed_transition();
  CHECK(evaluate_tf({t}, oracle_generator()).f1 == 1.0);
  CHECK(score_commands({fixtures::shed_ops(), 0}, t.gold_ops()).f1 == 1.0);
}

TEST_CASE("teacher-forced F1 agrees with the naive scorer") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Transition> ts;
    std::vector<UpdateSequence> preds;
    std::vector<std::size_t> junk;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      ts.push_back(with_gold(random_ops(rng, 5), 0, i));
      ts.back().action = i % 2 == 0 ? "go north" : "take knife";
      preds.push_back(random_ops(rng, 5));
      // Sometimes predict a slice of the truth so hits are common.
      if (rng() % 2 == 0) {
        auto gold = ts.back().gold_ops();
        preds.back().insert(preds.back().end(), gold.begin(), gold.begin() + static_cast<long>(gold.size() / 2));
      }
      junk.push_back(rng() % 3 == 0 ? 1 : 0);
    }
    UpdateGenerator gen = [&](const Transition& t, const BeliefGraph&) {
      return ParsedSequence{preds[static_cast<std::size_t>(t.step)], junk[static_cast<std::size_t>(t.step)]};
    };
    auto result = evaluate_tf(ts, gen, 1 + trial % 3);
    double mean = 0.0, go = 0.0;
    double hits = 0, np = 0, ng = 0;
    for (int i = 0; i < n; ++i) {
      auto p = rendered(preds[i]);
      for (std::size_t k = 0; k < junk[i]; ++k) p.push_back("<malformed " + std::to_string(k) + ">");
      const auto g = rendered(ts[i].gold_ops());
      const double f = naive_f1(p, g);
      mean += f;
      if (i % 2 == 0) go += f;
      CHECK(std::abs(result.per_transition[i] - f) < 1e-9);
      std::set<std::string> ps(p.begin(), p.end()), gs(g.begin(), g.end());
      np += ps.size();
      ng += gs.size();
      for (const auto& x : ps) hits += gs.count(x);
    }
    CHECK(std::abs(result.f1 - mean / n) < 1e-9);
    CHECK(std::abs(result.per_verb.at("go") - go / ((n + 1) / 2)) < 1e-9);
    const double micro = (np == 0 && ng == 0) ? 1.0
                         : hits == 0          ? 0.0
                                              : 2 * (hits / np) * (hits / ng) / (hits / np + hits / ng);
    CHECK(std::abs(result.micro_f1 - micro) < 1e-9);
  }
}

TEST_CASE("free-run F1 agrees with the naive scorer") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Game> games;
    std::map<std::pair<std::int64_t, std::int64_t>, UpdateSequence> preds;
    const int n_games = 1 + static_cast<int>(rng() % 3);
    for (int g = 0; g < n_games; ++g) {
      Game game;
      game.id = g;
      BeliefGraph seen;
      const int steps = static_cast<int>(rng() % 4);
      for (int s = 0; s < steps; ++s) {
        Transition t;
        t.game = g;
        t.step = s;
        t.action = "look";
        t.g_seen_prev = seen;
        seen = apply_update(seen, random_ops(rng, 4));
        t.g_seen_next = seen;
        game.transitions.push_back(t);
        preds[{g, s}] = rng() % 2 == 0 ? t.gold_ops() : random_ops(rng, 4);
      }
      games.push_back(game);
    }
    UpdateGenerator gen = [&](const Transition& t, const BeliefGraph&) {
      return ParsedSequence{preds.at({t.game, t.step}), 0};
    };
    const bool collapse = trial % 2 == 1;
    auto result = evaluate_fr(games, gen, collapse, 1 + trial % 2);
    double mean = 0.0;
    for (int g = 0; g < n_games; ++g) {
      BeliefGraph belief;
      for (const auto& t : games[g].transitions) belief = apply_update(belief, preds.at({t.game, t.step}));
      BeliefGraph gold = games[g].transitions.empty() ? BeliefGraph{} : games[g].transitions.back().g_seen_next;
      if (collapse) {
        belief = collapse_relations(belief, collapsed_relation());
        gold = collapse_relations(gold, collapsed_relation());
      }
      const double f = naive_f1(rendered(belief), rendered(gold));
      CHECK(std::abs(result.per_game[g] - f) < 1e-9);
      mean += f;
    }
    CHECK(std::abs(result.f1 - mean / n_games) < 1e-9);
  }
}

TEST_CASE("free-run F1 examples") {
  Game g;
  Transition t = with_gold({add_op("a", "b", "in"), add_op("c", "d", "on")});
  g.transitions.push_back(t);
  UpdateGenerator half = [](const Transition&, const BeliefGraph&) {
    return ParsedSequence{{add_op("a", "b", "in")}, 0};
  };
  CHECK(evaluate_fr({g}, half, false).f1 == doctest::Approx(2.0 / 3.0));
  UpdateGenerator silent = [](const Transition&, const BeliefGraph&) { return ParsedSequence{}; };
  CHECK(evaluate_fr({g}, silent, false).f1 == 0.0);
  CHECK(evaluate_fr({g}, oracle_generator(), false).f1 == 1.0);
  // relation mistakes vanish once both sides are collapsed
  UpdateGenerator wrong_rel = [](const Transition&, const BeliefGraph&) {
    return ParsedSequence{{add_op("a", "b", "on"), add_op("c", "d", "in")}, 0};
  };
  CHECK(evaluate_fr({g}, wrong_rel, false).f1 == 0.0);
  CHECK(evaluate_fr({g}, wrong_rel, true).f1 == 1.0);
}

TEST_CASE("free-run uses the model's own belief and skips off-path branches") {
  auto corpus = generate_corpus(WorldConfig::defaults(), {3, 0, 0}, 5);
  std::size_t calls = 0;
  UpdateGenerator counting = [&](const Transition& t, const BeliefGraph& belief) {
    ++calls;
    CHECK(t.on_path());
    CHECK(belief == t.g_seen_prev);
    return ParsedSequence{t.gold_ops(), 0};
  };
  auto result = evaluate_fr(corpus.train, counting, false);
  CHECK(result.f1 == 1.0);
  std::size_t on_path = 0;
  for (const auto& g : corpus.train) on_path += g.on_path().size();
  CHECK(calls == on_path);
  CHECK(result.step_curve.size() >= 1);
  for (double v : result.step_curve) CHECK(v == 1.0);
}

TEST_CASE("verb grouping") {
  CHECK(leading_verb("go north") == "go");
  CHECK(leading_verb("prepare meal") == "prepare");
  CHECK(leading_verb("look") == "look");
  CHECK(leading_verb("dance wildly") == "other");
  std::vector<Transition> looks{with_gold({}), with_gold({})};
  auto per = group_by_verb(looks, {1.0, 0.5});
  CHECK(per.size() == 1);
  CHECK(per.at("look") == doctest::Approx(0.75));
}

TEST_CASE("reports") {
  std::vector<Transition> ts{with_gold({add_op("a", "b", "in")}), with_gold({})};
  ts[1].action = "go west";
  EvalReport report;
  report.variant = "rgcn";
  report.transitions = ts.size();
  report.tf = evaluate_tf(ts, oracle_generator());
  auto json = report.to_json();
  CHECK(json.find("\"tf_f1\": 1.0") != std::string::npos);
  CHECK(json.find("\"go\"") != std::string::npos);
  CHECK(json.find("fr_f1") == std::string::npos);
  auto table = per_verb_table(*report.tf);
  CHECK(table.find("verb") == 0);
  CHECK(table.find("look") != std::string::npos);
  CHECK(table.find("1.000") != std::string::npos);
}

TEST_CASE("evaluation is independent of the job count") {
  auto corpus = generate_corpus(WorldConfig::defaults(), {4, 0, 0}, 9);
  auto all = flatten(corpus.train);
  std::mt19937_64 rng(3);
  std::vector<UpdateSequence> noise;
  for (std::size_t i = 0; i < all.size(); ++i) noise.push_back(random_ops(rng, 2));
  UpdateGenerator noisy = [&](const Transition& t, const BeliefGraph&) {
    auto ops = t.gold_ops();
    const auto& extra = noise[static_cast<std::size_t>(t.step * 7 + t.branch) % noise.size()];
    ops.insert(ops.end(), extra.begin(), extra.end());
    return ParsedSequence{ops, 0};
  };
  auto one = evaluate_tf(all, noisy, 1);
  auto four = evaluate_tf(all, noisy, 4);
  CHECK(one.per_transition == four.per_transition);
  CHECK(one.f1 == four.f1);
  auto fr1 = evaluate_fr(corpus.train, noisy, true, 1);
  auto fr3 = evaluate_fr(corpus.train, noisy, true, 3);
  CHECK(fr1.per_game == fr3.per_game);
  CHECK(fr1.step_curve == fr3.step_curve);
}
