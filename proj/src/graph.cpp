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

#include "kgup/graph.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace kgup {

std::string normalize_label(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

Relation::Relation(std::string label) : label_(std::move(label)) {
  if (label_.empty()) throw InvalidLabel("relation label is empty");
  for (char c : label_) {
    if (std::isspace(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c))) {
      throw InvalidLabel("relation label must be a lowercase token: '" + label_ + "'");
    }
  }
}

RelationRegistry::RelationRegistry(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (const auto& l : labels_) Relation{l};
}

const RelationRegistry& RelationRegistry::standard() {
  static const RelationRegistry registry({"at", "in", "on", "is", "north_of", "south_of", "east_of",
                                          "west_of", "part_of", "needs"});
  return registry;
}

bool RelationRegistry::contains(std::string_view label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

Relation RelationRegistry::make(std::string_view label) const {
  if (!contains(label)) throw UnknownRelation("unknown relation '" + std::string(label) + "'");
  return Relation(std::string(label));
}

std::size_t RelationRegistry::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw UnknownRelation("unknown relation '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::object: return "object";
    case EntityKind::player: return "player";
    case EntityKind::location: return "location";
    case EntityKind::state: return "state";
  }
  return "object";
}

Entity::Entity(std::string_view text, EntityKind k) : label(normalize_label(text)), kind(k) {
  if (label.empty()) throw InvalidLabel("entity label is empty");
}

Triple make_triple(std::string_view head, std::string_view tail, std::string_view relation) {
  return Triple{Entity(head), Entity(tail), Relation(std::string(relation))};
}

std::ostream& operator<<(std::ostream& os, const Triple& t) {
  return os << '(' << t.head.label << ", " << t.tail.label << ", " << t.relation.label() << ')';
}

BeliefGraph::BeliefGraph(std::initializer_list<Triple> triples) : triples_(triples) {}

BeliefGraph::BeliefGraph(std::set<Triple> triples) : triples_(std::move(triples)) {}

std::vector<Entity> BeliefGraph::vertices() const {
  std::map<std::string, EntityKind> seen;
  for (const auto& t : triples_) {
    seen.emplace(t.head.label, t.head.kind);
    seen.emplace(t.tail.label, t.tail.kind);
  }
  std::vector<Entity> out;
  out.reserve(seen.size());
  for (const auto& [label, kind] : seen) out.emplace_back(label, kind);
  return out;
}

BeliefGraph BeliefGraph::with(const Triple& t) const {
  if (contains(t)) return *this;
  auto copy = triples_;
  copy.insert(t);
  return BeliefGraph(std::move(copy));
}

BeliefGraph BeliefGraph::without(const Triple& t) const {
  if (!contains(t)) return *this;
  auto copy = triples_;
  copy.erase(t);
  return BeliefGraph(std::move(copy));
}

bool BeliefGraph::subset_of(const BeliefGraph& other) const {
  return std::includes(other.triples_.begin(), other.triples_.end(), triples_.begin(), triples_.end());
}

std::string_view to_string(Verb verb) { return verb == Verb::add ? "add" : "delete"; }

UpdateOp add_op(std::string_view head, std::string_view tail, std::string_view relation) {
  return UpdateOp{Verb::add, make_triple(head, tail, relation)};
}

UpdateOp delete_op(std::string_view head, std::string_view tail, std::string_view relation) {
  return UpdateOp{Verb::del, make_triple(head, tail, relation)};
}

BeliefGraph apply_op(const BeliefGraph& graph, const UpdateOp& op) {
  return op.verb == Verb::add ? graph.with(op.triple) : graph.without(op.triple);
}

BeliefGraph apply_update(const BeliefGraph& graph, const UpdateSequence& ops) {
  auto triples = graph.triples();
  for (const auto& op : ops) {
    if (op.verb == Verb::add) {
      triples.insert(op.triple);
    } else {
      triples.erase(op.triple);
    }
  }
  return BeliefGraph(std::move(triples));
}

UpdateSequence diff(const BeliefGraph& prev, const BeliefGraph& next) {
  UpdateSequence ops;
  for (const auto& t : next.triples()) {
    if (!prev.contains(t)) ops.push_back({Verb::add, t});
  }
  for (const auto& t : prev.triples()) {
    if (!next.contains(t)) ops.push_back({Verb::del, t});
  }
  return canonical_order(std::move(ops));
}

UpdateSequence canonical_order(UpdateSequence ops) {
  std::stable_sort(ops.begin(), ops.end(), [](const UpdateOp& a, const UpdateOp& b) {
    auto ka = std::tie(a.verb, a.triple.relation, a.triple.head.label, a.triple.tail.label);
    auto kb = std::tie(b.verb, b.triple.relation, b.triple.head.label, b.triple.tail.label);
    return ka < kb;
  });
  return ops;
}

const Relation& collapsed_relation() {
  static const Relation rel("rel");
  return rel;
}

BeliefGraph collapse_relations(const BeliefGraph& graph, const Relation& placeholder) {
  std::set<Triple> out;
  for (const auto& t : graph.triples()) out.insert(Triple{t.head, t.tail, placeholder});
  return BeliefGraph(std::move(out));
}

std::vector<Triple> to_rdf_triples(const BeliefGraph& graph) {
  return {graph.triples().begin(), graph.triples().end()};
}

void write_rdf(std::ostream& os, const BeliefGraph& graph) {
  for (const auto& t : to_rdf_triples(graph)) {
    os << t.head.label << '\t' << t.relation.label() << '\t' << t.tail.label << '\n';
  }
}

std::string to_rdf_text(const BeliefGraph& graph) {
  std::ostringstream os;
  write_rdf(os, graph);
  return os.str();
}

BeliefGraph read_rdf(std::istream& is, const RelationRegistry* registry) {
  std::set<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (normalize_label(line).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw std::runtime_error("rdf line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                               std::to_string(fields.size()));
    }
    auto relation = normalize_label(fields[1]);
    if (registry != nullptr && !registry->contains(relation)) {
      throw UnknownRelation("rdf line " + std::to_string(line_no) + ": unknown relation '" + relation + "'");
    }
    try {
      triples.insert(make_triple(fields[0], fields[2], relation));
    } catch (const InvalidLabel& e) {
      throw std::runtime_error("rdf line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return BeliefGraph(std::move(triples));
}

}  // namespace kgup
