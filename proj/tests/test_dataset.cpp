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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "kgup/dataset.hpp"

using namespace kgup;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("kgup_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::set<std::string> food_names(const std::vector<Game>& games) {
  std::set<std::string> out;
  for (const auto& g : games) {
    for (const auto& t : g.transitions) {
      if (!t.g_full_next) continue;
      for (const auto& tr : t.g_full_next->triples()) {
        // foods are the only multi-word heads besides furniture and doors
        if (tr.head.label.find(' ') != std::string::npos) out.insert(tr.head.label);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("jsonl round trip") {
  auto g = generate_game(WorldConfig::defaults(), 4, 17);
  for (const auto& t : g.transitions) {
    auto back = from_jsonl_line(to_jsonl_line(t), 1);
    CHECK(back.game == 17);
    CHECK(back.step == t.step);
    CHECK(back.branch == t.branch);
    CHECK(back.g_seen_prev == t.g_seen_prev);
    CHECK(back.g_seen_next == t.g_seen_next);
    CHECK(back.action == t.action);
    CHECK(back.observation == t.observation);
  }
}

TEST_CASE("load_dataset") {
  auto dir = temp_dir("load");
  {
    std::ofstream(dir / "empty.jsonl");
  }
  CHECK(load_dataset(dir / "empty.jsonl").empty());

  auto g = generate_game(WorldConfig::defaults(), 8);
  {
    std::ofstream os(dir / "one.jsonl");
    os << to_jsonl_line(g.transitions[2]) << "\n";
  }
  auto one = load_dataset(dir / "one.jsonl");
  REQUIRE(one.size() == 1);
  CHECK(one[0].gold_ops() == g.transitions[2].gold_ops());

  // ops that disagree with the graphs are rejected with the line number
  auto record = nlohmann::json::parse(to_jsonl_line(g.transitions[2]));
  record["ops"] = nlohmann::json::array({"add ( ghost , shed , in )"});
  {
    std::ofstream os(dir / "bad.jsonl");
    os << to_jsonl_line(g.transitions[0]) << "\n" << record.dump() << "\n";
  }
  try {
    load_dataset(dir / "bad.jsonl");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 2);
  }
  {
    std::ofstream os(dir / "garbage.jsonl");
    os << "{not json\n";
  }
  CHECK_THROWS_AS(load_dataset(dir / "garbage.jsonl"), SchemaError);
  CHECK_THROWS(load_dataset(dir / "missing.jsonl"));
}

TEST_CASE("vocabulary covers the corpus") {
  auto g = generate_game(WorldConfig::defaults(), 3);
  auto vocab = build_vocab(g.transitions);
  for (const auto* t : {"<pad>", "<sos>", "<eos>", "<sep>", "<unk>", "add", "delete", "(", ")", ",", "east_of", "east",
                        "of"}) {
    CHECK_MESSAGE(vocab.contains(t), t);
  }
  for (const auto& t : g.transitions) {
    for (const auto& tok : tokenize_text(t.observation)) CHECK(vocab.contains(tok.text));
    for (const auto& tok : tokenize_text(t.action)) CHECK(vocab.contains(tok.text));
  }
  CHECK(build_vocab(g.transitions) == vocab);
}

TEST_CASE("corpus splits hold out adjective-noun combinations") {
  auto corpus = generate_corpus(WorldConfig::defaults(), {12, 3, 4}, 5, 2);
  CHECK(corpus.train.size() == 12);
  CHECK(corpus.valid.size() == 3);
  CHECK(corpus.test.size() == 4);
  auto train_foods = food_names(corpus.train);
  auto test_foods = food_names(corpus.test);
  const auto config = WorldConfig::defaults();
  const auto pool = config.food_pool();
  const std::set<std::string> food_pool(pool.begin(), pool.end());
  for (const auto& f : test_foods) {
    if (food_pool.contains(f)) CHECK_MESSAGE(!train_foods.contains(f), f);
  }
  std::set<std::int64_t> ids;
  for (const auto* split : {&corpus.train, &corpus.valid, &corpus.test}) {
    for (const auto& g : *split) CHECK(ids.insert(g.id).second);
  }
  // thread count does not change the result
  auto serial = generate_corpus(WorldConfig::defaults(), {12, 3, 4}, 5, 1);
  std::ostringstream a, b;
  write_transitions(a, flatten(corpus.test));
  write_transitions(b, flatten(serial.test));
  CHECK(a.str() == b.str());
}

TEST_CASE("build_dataset is byte-deterministic") {
  auto d1 = temp_dir("ds1"), d2 = temp_dir("ds2");
  auto s1 = build_dataset(WorldConfig::defaults(), {6, 2, 2}, 42, d1, 2);
  build_dataset(WorldConfig::defaults(), {6, 2, 2}, 42, d2, 1);
  for (const auto* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "stats.json"}) {
    CHECK(fs::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  auto train = load_dataset(d1 / "train.jsonl");
  CHECK(train.size() == s1.n_train);
  std::size_t walk = 0;
  for (const auto& g : group_games(train)) {
    for (const auto& t : g.transitions) walk += t.on_path();
  }
  CHECK(train.size() == 6 * walk);
  CHECK(s1.avg_operations > 0.0);
  CHECK(s1.n_edges == 10);
  auto stats = nlohmann::json::parse(slurp(d1 / "stats.json"));
  CHECK(stats.contains("#Train"));
  CHECK(stats.contains("Avg. #Operations"));
}
