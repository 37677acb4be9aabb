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

#include "kgup/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace kgup {
namespace {

using json = nlohmann::json;

EntityKind guess_kind(const std::string& label) {
  static const std::set<std::string> states = {"open",   "closed", "sliced", "chopped",
                                               "diced",  "fried",  "roasted", "grilled"};
  if (label == "player") return EntityKind::player;
  if (states.contains(label)) return EntityKind::state;
  return EntityKind::object;
}

json graph_to_json(const BeliefGraph& g) {
  json arr = json::array();
  for (const auto& t : to_rdf_triples(g)) arr.push_back({t.head.label, t.relation.label(), t.tail.label});
  return arr;
}

BeliefGraph graph_from_json(const json& arr, std::size_t line_no, const char* key,
                            const RelationRegistry& relations) {
  if (!arr.is_array()) throw SchemaError(line_no, std::string("'") + key + "' must be an array");
  std::set<Triple> out;
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 3 || !item[0].is_string() || !item[1].is_string() ||
        !item[2].is_string()) {
      throw SchemaError(line_no, std::string("'") + key + "' entries must be [head, relation, tail] strings");
    }
    auto rel = item[1].get<std::string>();
    if (!relations.contains(rel)) throw SchemaError(line_no, "unknown relation '" + rel + "'");
    try {
      auto head = item[0].get<std::string>();
      auto tail = item[2].get<std::string>();
      out.insert(Triple{Entity(head, guess_kind(normalize_label(head))), Entity(tail, guess_kind(normalize_label(tail))),
                        Relation(rel)});
    } catch (const InvalidLabel& e) {
      throw SchemaError(line_no, e.what());
    }
  }
  return BeliefGraph(std::move(out));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::string to_jsonl_line(const Transition& t) {
  json ops = json::array();
  for (const auto& op : t.gold_ops()) ops.push_back(render_op(op));
  json j;
  j["game"] = t.game;
  j["step"] = t.step;
  j["branch"] = t.branch;
  j["graph_prev"] = graph_to_json(t.g_seen_prev);
  j["action"] = t.action;
  j["observation"] = t.observation;
  j["graph_next"] = graph_to_json(t.g_seen_next);
  j["ops"] = std::move(ops);
  return j.dump();
}

Transition from_jsonl_line(const std::string& line, std::size_t line_no, const RelationRegistry& relations) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError(line_no, "record must be a JSON object");
  for (const char* key : {"game", "step", "graph_prev", "action", "observation", "graph_next", "ops"}) {
    if (!j.contains(key)) throw SchemaError(line_no, std::string("missing key '") + key + "'");
  }
  auto require_int = [&](const char* key) {
    if (!j[key].is_number_integer()) throw SchemaError(line_no, std::string("'") + key + "' must be an integer");
    return j[key].get<std::int64_t>();
  };
  auto require_string = [&](const char* key) {
    if (!j[key].is_string()) throw SchemaError(line_no, std::string("'") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  Transition t;
  t.game = require_int("game");
  t.step = require_int("step");
  t.branch = j.contains("branch") ? require_int("branch") : 0;
  t.action = require_string("action");
  t.observation = require_string("observation");
  t.g_seen_prev = graph_from_json(j["graph_prev"], line_no, "graph_prev", relations);
  t.g_seen_next = graph_from_json(j["graph_next"], line_no, "graph_next", relations);

  if (!j["ops"].is_array()) throw SchemaError(line_no, "'ops' must be an array");
  UpdateSequence stored;
  for (const auto& op : j["ops"]) {
    if (!op.is_string()) throw SchemaError(line_no, "'ops' entries must be strings");
    try {
      auto tokens = tokenize(op.get<std::string>());
      stored.push_back(parse_op(tokens, relations));
    } catch (const std::exception& e) {
      throw SchemaError(line_no, std::string("bad op: ") + e.what());
    }
  }
  if (stored != t.gold_ops()) {
    throw SchemaError(line_no, "'ops' does not match the difference of graph_prev and graph_next");
  }
  return t;
}

void write_transitions(std::ostream& os, const std::vector<Transition>& transitions) {
  for (const auto& t : transitions) os << to_jsonl_line(t) << '\n';
}

std::vector<Transition> read_transitions(std::istream& is, const RelationRegistry& relations) {
  std::vector<Transition> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(from_jsonl_line(line, line_no, relations));
  }
  return out;
}

std::vector<Transition> load_dataset(const std::filesystem::path& path, const RelationRegistry& relations) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path.string() + "'");
  return read_transitions(in, relations);
}

std::vector<Game> group_games(const std::vector<Transition>& transitions) {
  std::vector<Game> games;
  std::map<std::int64_t, std::size_t> index;
  for (const auto& t : transitions) {
    auto [it, inserted] = index.emplace(t.game, games.size());
    if (inserted) games.push_back(Game{t.game, {}, {}});
    auto& g = games[it->second];
    if (t.on_path()) g.walkthrough.push_back(t.action);
    g.transitions.push_back(t);
  }
  return games;
}

Vocabulary build_vocab(const std::vector<Transition>& transitions, const RelationRegistry& relations) {
  Vocabulary v;
  for (const char* t : {"add", "delete", "(", ")", ","}) v.add(t);
  for (const auto& label : relations.labels()) {
    v.add(label);
    std::size_t start = 0;
    for (;;) {
      auto us = label.find('_', start);
      v.add(label.substr(start, us - start));
      if (us == std::string::npos) break;
      start = us + 1;
    }
  }
  auto add_graph = [&](const BeliefGraph& g) {
    for (const auto& e : g.vertices()) {
      for (const auto& tok : tokenize(e.label)) v.add(tok.text);
    }
  };
  for (const auto& t : transitions) {
    for (const auto& tok : tokenize_text(t.action)) v.add(tok.text);
    for (const auto& tok : tokenize_text(t.observation)) v.add(tok.text);
    add_graph(t.g_seen_prev);
    add_graph(t.g_seen_next);
  }
  return v;
}

CorpusStats corpus_stats(const std::vector<Transition>& train, const std::vector<Transition>& valid,
                         const std::vector<Transition>& test) {
  CorpusStats s;
  s.n_train = train.size();
  s.n_valid = valid.size();
  s.n_test = test.size();
  std::set<std::string> vertices, relations;
  std::size_t obs_tokens = 0, ops = 0, connections = 0, n = 0;
  for (const auto* split : {&train, &valid, &test}) {
    for (const auto& t : *split) {
      ++n;
      obs_tokens += tokenize_text(t.observation).size();
      ops += t.gold_ops().size();
      connections += t.g_seen_next.size();
      for (const auto* g : {&t.g_seen_prev, &t.g_seen_next}) {
        for (const auto& tr : g->triples()) {
          vertices.insert(tr.head.label);
          vertices.insert(tr.tail.label);
          relations.insert(tr.relation.label());
        }
      }
    }
  }
  if (n > 0) {
    s.avg_obs_tokens = static_cast<double>(obs_tokens) / static_cast<double>(n);
    s.avg_operations = static_cast<double>(ops) / static_cast<double>(n);
    s.avg_connections = static_cast<double>(connections) / static_cast<double>(n);
  }
  s.n_vertices = vertices.size();
  s.n_edges = relations.size();
  return s;
}

std::string format_stats_table(const CorpusStats& s) {
  std::ostringstream os;
  os << std::left << std::setw(9) << "#Train" << std::setw(9) << "#Valid" << std::setw(9) << "#Test"
     << std::setw(11) << "Avg. Obs." << std::setw(18) << "Avg. #Operations" << std::setw(11) << "#Vertices"
     << std::setw(8) << "#Edges" << "Avg. #Connections\n";
  os << std::setw(9) << s.n_train << std::setw(9) << s.n_valid << std::setw(9) << s.n_test << std::fixed
     << std::setprecision(1) << std::setw(11) << s.avg_obs_tokens << std::setw(18) << s.avg_operations
     << std::setw(11) << s.n_vertices << std::setw(8) << s.n_edges << s.avg_connections << '\n';
  return os.str();
}

std::string stats_json(const CorpusStats& s) {
  json j;
  j["#Train"] = s.n_train;
  j["#Valid"] = s.n_valid;
  j["#Test"] = s.n_test;
  j["Avg. Obs."] = s.avg_obs_tokens;
  j["Avg. #Operations"] = s.avg_operations;
  j["#Vertices"] = s.n_vertices;
  j["#Edges"] = s.n_edges;
  j["Avg. #Connections"] = s.avg_connections;
  return j.dump(2);
}

SplitCorpus generate_corpus(const WorldConfig& config, const SplitCounts& counts, std::uint64_t seed, int jobs) {
  config.validate();
  if (counts.train < 0 || counts.valid < 0 || counts.test < 0) throw ConfigError("split counts must be >= 0");

  // Hold out a share of adjective-noun combinations for valid/test.
  auto pool = config.food_pool();
  std::mt19937_64 rng(splitmix64(seed ^ 0xF00Du));
  std::shuffle(pool.begin(), pool.end(), rng);
  auto held = std::max<std::size_t>(static_cast<std::size_t>(config.n_objects), pool.size() * 3 / 10);
  if (pool.size() < held + static_cast<std::size_t>(config.n_objects)) {
    throw ConfigError("food pool too small to hold out combinations for the test split");
  }
  WorldConfig train_config = config;
  WorldConfig heldout_config = config;
  heldout_config.food_names.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(held));
  train_config.food_names.assign(pool.begin() + static_cast<std::ptrdiff_t>(held), pool.end());
  std::sort(train_config.food_names.begin(), train_config.food_names.end());
  std::sort(heldout_config.food_names.begin(), heldout_config.food_names.end());

  struct Job {
    const WorldConfig* config;
    std::int64_t id;
  };
  std::vector<Job> work;
  std::int64_t id = 0;
  for (int i = 0; i < counts.train; ++i) work.push_back({&train_config, id++});
  for (int i = 0; i < counts.valid + counts.test; ++i) work.push_back({&heldout_config, id++});

  std::vector<Game> games(work.size());
  auto run = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < work.size(); k += stride) {
      games[k] = generate_game(*work[k].config, splitmix64(seed * 1000003ull + static_cast<std::uint64_t>(work[k].id)),
                               work[k].id);
    }
  };
  auto n_threads = static_cast<std::size_t>(std::max(1, jobs));
  if (n_threads == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
      threads.emplace_back([&, t] {
        try {
          run(t, n_threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SplitCorpus out;
  auto n_train = static_cast<std::size_t>(counts.train);
  auto n_valid = static_cast<std::size_t>(counts.valid);
  for (std::size_t k = 0; k < games.size(); ++k) {
    auto& dest = k < n_train ? out.train : (k < n_train + n_valid ? out.valid : out.test);
    dest.push_back(std::move(games[k]));
  }
  return out;
}

std::vector<Transition> flatten(const std::vector<Game>& games) {
  std::vector<Transition> out;
  for (const auto& g : games) out.insert(out.end(), g.transitions.begin(), g.transitions.end());
  return out;
}

CorpusStats build_dataset(const WorldConfig& config, const SplitCounts& counts, std::uint64_t seed,
                          const std::filesystem::path& dir, int jobs) {
  auto corpus = generate_corpus(config, counts, seed, jobs);
  std::filesystem::create_directories(dir);
  auto train = flatten(corpus.train);
  auto valid = flatten(corpus.valid);
  auto test = flatten(corpus.test);
  auto write = [&](const char* name, const std::vector<Transition>& ts) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    write_transitions(out, ts);
    if (!out) throw std::runtime_error("write failed for '" + (dir / name).string() + "'");
  };
  write("train.jsonl", train);
  write("valid.jsonl", valid);
  write("test.jsonl", test);
  auto stats = corpus_stats(train, valid, test);
  std::ofstream s(dir / "stats.json", std::ios::binary);
  s << stats_json(stats) << '\n';
  if (!s) throw std::runtime_error("cannot write stats.json");
  return stats;
}

}  // namespace kgup
