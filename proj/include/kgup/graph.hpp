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

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace kgup {

class UnknownRelation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidLabel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Lowercases, trims and collapses internal whitespace runs to single spaces.
std::string normalize_label(std::string_view text);

class Relation {
 public:
  Relation() = default;
  /// Throws InvalidLabel for an empty label or one containing whitespace.
  explicit Relation(std::string label);

  const std::string& label() const { return label_; }

  friend bool operator==(const Relation&, const Relation&) = default;
  friend auto operator<=>(const Relation&, const Relation&) = default;

 private:
  std::string label_;
};

/// Fixed set of relation labels a graph may use. The default registry holds
/// the ten labels of the cooking-world corpus.
class RelationRegistry {
 public:
  explicit RelationRegistry(std::vector<std::string> labels);

  static const RelationRegistry& standard();

  bool contains(std::string_view label) const;
  /// Throws UnknownRelation.
  Relation make(std::string_view label) const;
  /// Throws UnknownRelation.
  std::size_t index_of(std::string_view label) const;

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
};

enum class EntityKind { object, player, location, state };

std::string_view to_string(EntityKind kind);

/// A vertex label. The kind tag is metadata and never takes part in equality
/// or ordering.
struct Entity {
  Entity() = default;
  /// Normalizes the label; throws InvalidLabel if it ends up empty.
  Entity(std::string_view label, EntityKind kind = EntityKind::object);

  std::string label;
  EntityKind kind = EntityKind::object;

  friend bool operator==(const Entity& a, const Entity& b) { return a.label == b.label; }
  friend auto operator<=>(const Entity& a, const Entity& b) { return a.label <=> b.label; }
};

struct Triple {
  Entity head;
  Entity tail;
  Relation relation;

  auto key() const { return std::tie(head.label, tail.label, relation.label()); }

  friend bool operator==(const Triple& a, const Triple& b) { return a.key() == b.key(); }
  friend auto operator<=>(const Triple& a, const Triple& b) { return a.key() <=> b.key(); }
};

Triple make_triple(std::string_view head, std::string_view tail, std::string_view relation);

std::ostream& operator<<(std::ostream& os, const Triple& t);

/// Immutable set of triples. The vertex set is derived from the triples, so a
/// vertex disappears together with its last edge.
class BeliefGraph {
 public:
  BeliefGraph() = default;
  BeliefGraph(std::initializer_list<Triple> triples);
  explicit BeliefGraph(std::set<Triple> triples);

  bool contains(const Triple& t) const { return triples_.contains(t); }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }
  const std::set<Triple>& triples() const { return triples_; }

  /// Sorted, deduplicated vertex labels with the kind of their first occurrence.
  std::vector<Entity> vertices() const;

  BeliefGraph with(const Triple& t) const;
  BeliefGraph without(const Triple& t) const;

  /// True if every triple of this graph is also in `other`.
  bool subset_of(const BeliefGraph& other) const;

  friend bool operator==(const BeliefGraph&, const BeliefGraph&) = default;

 private:
  std::set<Triple> triples_;
};

enum class Verb { add, del };

std::string_view to_string(Verb verb);

struct UpdateOp {
  Verb verb = Verb::add;
  Triple triple;

  friend bool operator==(const UpdateOp&, const UpdateOp&) = default;
  friend auto operator<=>(const UpdateOp& a, const UpdateOp& b) {
    if (auto c = a.verb <=> b.verb; c != 0) return c;
    return a.triple <=> b.triple;
  }
};

using UpdateSequence = std::vector<UpdateOp>;

UpdateOp add_op(std::string_view head, std::string_view tail, std::string_view relation);
UpdateOp delete_op(std::string_view head, std::string_view tail, std::string_view relation);

BeliefGraph apply_op(const BeliefGraph& graph, const UpdateOp& op);
BeliefGraph apply_update(const BeliefGraph& graph, const UpdateSequence& ops);

/// Adds (next minus prev) and deletes (prev minus next), canonically ordered.
UpdateSequence diff(const BeliefGraph& prev, const BeliefGraph& next);

/// Adds before deletes; within a verb by (relation, head, tail). Stable.
UpdateSequence canonical_order(UpdateSequence ops);

BeliefGraph collapse_relations(const BeliefGraph& graph, const Relation& placeholder);

/// Placeholder used for single-relation views of a graph.
const Relation& collapsed_relation();

std::vector<Triple> to_rdf_triples(const BeliefGraph& graph);

// RDF text files: one `head<TAB>relation<TAB>tail` line per triple, sorted.
void write_rdf(std::ostream& os, const BeliefGraph& graph);
std::string to_rdf_text(const BeliefGraph& graph);
/// Throws std::runtime_error with a line number on malformed lines, and
/// UnknownRelation when `registry` is given and rejects a label.
BeliefGraph read_rdf(std::istream& is, const RelationRegistry* registry = nullptr);

}  // namespace kgup
