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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgup/command.hpp"
#include "kgup/world.hpp"

namespace kgup {

class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// JSONL record: {"game", "step", "branch", "graph_prev", "action",
// "observation", "graph_next", "ops"} with graphs as [head, relation, tail]
// lists and ops as rendered commands in canonical order.
std::string to_jsonl_line(const Transition& t);
Transition from_jsonl_line(const std::string& line, std::size_t line_no,
                           const RelationRegistry& relations = RelationRegistry::standard());

void write_transitions(std::ostream& os, const std::vector<Transition>& transitions);
std::vector<Transition> read_transitions(std::istream& is,
                                         const RelationRegistry& relations = RelationRegistry::standard());
/// Throws SchemaError, or std::runtime_error if the file cannot be opened.
std::vector<Transition> load_dataset(const std::filesystem::path& path,
                                     const RelationRegistry& relations = RelationRegistry::standard());

/// Regroups transitions into games, preserving file order within a game.
std::vector<Game> group_games(const std::vector<Transition>& transitions);

/// Reserved tokens, verbs, command punctuation, relation labels (whole and
/// split on underscores) and every token of observations, actions and
/// entity labels, in first-seen order.
Vocabulary build_vocab(const std::vector<Transition>& transitions,
                       const RelationRegistry& relations = RelationRegistry::standard());

struct CorpusStats {
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  std::size_t n_test = 0;
  double avg_obs_tokens = 0.0;
  double avg_operations = 0.0;
  std::size_t n_vertices = 0;
  std::size_t n_edges = 0;
  double avg_connections = 0.0;
};

CorpusStats corpus_stats(const std::vector<Transition>& train, const std::vector<Transition>& valid,
                         const std::vector<Transition>& test);
std::string format_stats_table(const CorpusStats& stats);
std::string stats_json(const CorpusStats& stats);

struct SplitCounts {
  int train = 0;
  int valid = 0;
  int test = 0;
};

struct SplitCorpus {
  std::vector<Game> train;
  std::vector<Game> valid;
  std::vector<Game> test;
};

/// Deterministic in (config, counts, seed). Valid and test games draw food
/// names from adjective-noun combinations never used in train.
SplitCorpus generate_corpus(const WorldConfig& config, const SplitCounts& counts, std::uint64_t seed,
                            int jobs = 1);

std::vector<Transition> flatten(const std::vector<Game>& games);

/// Writes train.jsonl, valid.jsonl, test.jsonl and stats.json into `dir`.
CorpusStats build_dataset(const WorldConfig& config, const SplitCounts& counts, std::uint64_t seed,
                          const std::filesystem::path& dir, int jobs = 1);

}  // namespace kgup
