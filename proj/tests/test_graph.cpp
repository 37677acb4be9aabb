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

#include <algorithm>
#include <random>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "kgup/graph.hpp"

using namespace kgup;

namespace {

using Key = std::tuple<std::string, std::string, std::string>;

// Independent oracle: graphs as sorted vectors of string tuples.
std::vector<Key> keys(const BeliefGraph& g) {
  std::vector<Key> out;
  for (const auto& t : g.triples()) out.emplace_back(t.head.label, t.tail.label, t.relation.label());
  return out;
}

BeliefGraph random_graph(std::mt19937_64& rng, int max_triples) {
  static const std::vector<std::string> names = {"player", "shed", "backyard", "toolbox", "closed", "open",
                                                 "red apple", "knife", "kitchen"};
  const auto& rels = RelationRegistry::standard().labels();
  std::uniform_int_distribution<int> count(0, max_triples);
  std::uniform_int_distribution<std::size_t> pick_name(0, names.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_rel(0, rels.size() - 1);
  std::set<Triple> ts;
  int n = count(rng);
  for (int i = 0; i < n; ++i) ts.insert(make_triple(names[pick_name(rng)], names[pick_name(rng)], rels[pick_rel(rng)]));
  return BeliefGraph(std::move(ts));
}

UpdateSequence table2_ops() {
  return {add_op("player", "shed", "at"),     add_op("shed", "backyard", "west_of"),
          add_op("wooden door", "shed", "east_of"), add_op("toolbox", "shed", "in"),
          add_op("toolbox", "closed", "is"),  add_op("workbench", "shed", "in"),
          delete_op("player", "backyard", "at")};
}

}  // namespace

TEST_CASE("relation and entity validation") {
  CHECK(Relation("west_of").label() == "west_of");
  CHECK_THROWS_AS(Relation(""), InvalidLabel);
  CHECK_THROWS_AS(Relation("west of"), InvalidLabel);
  CHECK(RelationRegistry::standard().size() == 10);
  CHECK_THROWS_AS(RelationRegistry::standard().make("flies_over"), UnknownRelation);
  CHECK(Entity("  Red  Hot\tChili Pepper ").label == "red hot chili pepper");
  CHECK_THROWS_AS(Entity("   "), InvalidLabel);
  CHECK(Entity("shed", EntityKind::location) == Entity("shed", EntityKind::object));
}

TEST_CASE("apply_op") {
  BeliefGraph empty;
  auto g = apply_op(empty, add_op("player", "shed", "at"));
  CHECK(keys(g) == std::vector<Key>{{"player", "shed", "at"}});
  CHECK(empty.empty());
  CHECK(apply_op(empty, delete_op("player", "backyard", "at")).empty());
  BeliefGraph closed{make_triple("toolbox", "closed", "is")};
  CHECK(apply_op(closed, add_op("toolbox", "closed", "is")) == closed);
}

TEST_CASE("apply_update") {
  auto g = apply_update({}, table2_ops());
  CHECK(g.size() == 6);
  CHECK_FALSE(g.contains(make_triple("player", "backyard", "at")));
  for (const auto& op : table2_ops()) {
    if (op.verb == Verb::add) CHECK(g.contains(op.triple));
  }
  BeliefGraph some{make_triple("a", "b", "in")};
  CHECK(apply_update(some, {}) == some);
  BeliefGraph yard{make_triple("player", "backyard", "at")};
  CHECK(apply_update(yard, {add_op("player", "shed", "at"), delete_op("player", "backyard", "at")}) ==
        BeliefGraph{make_triple("player", "shed", "at")});
}

TEST_CASE("diff examples") {
  BeliefGraph g{make_triple("a", "b", "in")};
  CHECK(diff(g, g).empty());
  CHECK(diff({}, BeliefGraph{make_triple("toolbox", "shed", "in")}) ==
        UpdateSequence{add_op("toolbox", "shed", "in")});
  CHECK(diff(BeliefGraph{make_triple("player", "backyard", "at")}, BeliefGraph{make_triple("player", "shed", "at")}) ==
        UpdateSequence{add_op("player", "shed", "at"), delete_op("player", "backyard", "at")});
}

TEST_CASE("diff round trip and permutation independence against a set oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    auto a = random_graph(rng, 12);
    auto b = random_graph(rng, 12);
    auto ops = diff(a, b);
    CHECK(apply_update(a, ops) == b);

    auto ka = keys(a), kb = keys(b);
    std::vector<Key> adds, dels;
    std::set_difference(kb.begin(), kb.end(), ka.begin(), ka.end(), std::back_inserter(adds));
    std::set_difference(ka.begin(), ka.end(), kb.begin(), kb.end(), std::back_inserter(dels));
    std::size_t n_add = 0;
    for (const auto& op : ops) n_add += op.verb == Verb::add;
    CHECK(n_add == adds.size());
    CHECK(ops.size() - n_add == dels.size());

    std::shuffle(ops.begin(), ops.end(), rng);
    CHECK(apply_update(a, ops) == b);
    CHECK(canonical_order(ops) == diff(a, b));
  }
}

TEST_CASE("canonical_order") {
  UpdateSequence mixed{delete_op("a", "b", "in"), add_op("c", "d", "on")};
  CHECK(canonical_order(mixed) == UpdateSequence{add_op("c", "d", "on"), delete_op("a", "b", "in")});
  UpdateSequence sorted{add_op("player", "shed", "at"), add_op("shed", "backyard", "west_of")};
  CHECK(canonical_order(sorted) == sorted);
  UpdateSequence reversed{add_op("shed", "backyard", "west_of"), add_op("player", "shed", "at")};
  CHECK(canonical_order(reversed) == sorted);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto ops = diff(random_graph(rng, 10), random_graph(rng, 10));
    std::shuffle(ops.begin(), ops.end(), rng);
    auto once = canonical_order(ops);
    CHECK(canonical_order(once) == once);
    for (std::size_t i = 1; i < once.size(); ++i) {
      const auto& p = once[i - 1];
      const auto& q = once[i];
      auto kp = std::make_tuple(p.verb == Verb::del, p.triple.relation.label(), p.triple.head.label, p.triple.tail.label);
      auto kq = std::make_tuple(q.verb == Verb::del, q.triple.relation.label(), q.triple.head.label, q.triple.tail.label);
      CHECK(kp <= kq);
    }
  }
}

TEST_CASE("vertex set follows the triples") {
  BeliefGraph g{make_triple("toolbox", "shed", "in"), make_triple("toolbox", "closed", "is")};
  CHECK(g.vertices().size() == 3);
  auto h = apply_op(g, delete_op("toolbox", "closed", "is"));
  auto vs = h.vertices();
  CHECK(vs.size() == 2);
  CHECK(std::none_of(vs.begin(), vs.end(), [](const Entity& e) { return e.label == "closed"; }));
}

TEST_CASE("collapse_relations") {
  CHECK(collapse_relations({}, collapsed_relation()).empty());
  BeliefGraph two{make_triple("a", "b", "in"), make_triple("a", "b", "on")};
  auto c = collapse_relations(two, collapsed_relation());
  CHECK(keys(c) == std::vector<Key>{{"a", "b", "rel"}});
  CHECK(keys(collapse_relations(BeliefGraph{make_triple("player", "shed", "at")}, collapsed_relation())) ==
        std::vector<Key>{{"player", "shed", "rel"}});
}

TEST_CASE("rdf listing and text round trip") {
  CHECK(to_rdf_triples({}).empty());
  BeliefGraph g{make_triple("toolbox", "closed", "is"), make_triple("player", "shed", "at")};
  auto list = to_rdf_triples(g);
  REQUIRE(list.size() == 2);
  CHECK(list[0] == make_triple("player", "shed", "at"));
  CHECK(list[1] == make_triple("toolbox", "closed", "is"));
  CHECK(to_rdf_triples(BeliefGraph{make_triple("a", "b", "in")}).size() == 1);

  auto text = to_rdf_text(g);
  CHECK(text == "player\tat\tshed\ntoolbox\tis\tclosed\n");
  std::istringstream is(text);
  CHECK(read_rdf(is, &RelationRegistry::standard()) == g);

  std::istringstream bad("player\tat\n");
  CHECK_THROWS(read_rdf(bad));
  std::istringstream unknown("a\tflies_over\tb\n");
  CHECK_THROWS_AS(read_rdf(unknown, &RelationRegistry::standard()), UnknownRelation);
}
