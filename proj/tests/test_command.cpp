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

#include <random>

#include "doctest.h"
#include "kgup/command.hpp"

using namespace kgup;

namespace {

TokenList with_eos(TokenList tokens) {
  tokens.push_back(Token{std::string(kEos), std::nullopt});
  return tokens;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(texts(tokenize("add (player, shed, at)")) ==
        std::vector<std::string>{"add", "(", "player", ",", "shed", ",", "at", ")"});
  CHECK(tokenize("").empty());
  auto t = tokenize("delete (red hot chili pepper, counter, on)");
  CHECK(texts(t) ==
        std::vector<std::string>{"delete", "(", "red", "hot", "chili", "pepper", ",", "counter", ",", "on", ")"});
  CHECK(t[2].text == "red");
  CHECK(t[5].text == "pepper");
  CHECK(t[5].source_index == 5);
  CHECK(texts(tokenize("ADD ( A , B , IN )")) == std::vector<std::string>{"add", "(", "a", ",", "b", ",", "in", ")"});
}

TEST_CASE("tokenize is idempotent on rendered text") {
  auto once = tokenize("add (red hot chili pepper, counter, on)");
  CHECK(texts(tokenize(join(once))) == texts(once));
}

TEST_CASE("tokenize_text splits sentence punctuation") {
  CHECK(texts(tokenize_text("You see a box. It is closed!")) ==
        std::vector<std::string>{"you", "see", "a", "box", ".", "it", "is", "closed", "!"});
}

TEST_CASE("parse_op") {
  const auto& reg = RelationRegistry::standard();
  CHECK(parse_op(tokenize("add (toolbox, shed, in)"), reg) == add_op("toolbox", "shed", "in"));
  CHECK(parse_op(tokenize("delete (red hot chili pepper, counter, on)"), reg) ==
        delete_op("red hot chili pepper", "counter", "on"));
  CHECK_THROWS_AS(parse_op(tokenize("add (a, b)"), reg), MalformedCommand);
  CHECK_THROWS_AS(parse_op(tokenize("add (a, b, flies_over)"), reg), UnknownRelation);
  CHECK_THROWS_AS(parse_op(tokenize("put (a, b, in)"), reg), MalformedCommand);
  CHECK_THROWS_AS(parse_op(tokenize("add a, b, in)"), reg), MalformedCommand);
  CHECK_THROWS_AS(parse_op(tokenize("add (a, b, in"), reg), MalformedCommand);
  CHECK_THROWS_AS(parse_op(tokenize("add (a, , in)"), reg), MalformedCommand);
  CHECK_THROWS_AS(parse_op(tokenize("add (a, b, in) x"), reg), MalformedCommand);
  CHECK_THROWS(parse_op(tokenize("add (a, b, west of)"), reg));
}

TEST_CASE("render_op") {
  CHECK(render_op(add_op("player", "shed", "at")) == "add ( player , shed , at )");
  CHECK(render_op(delete_op("player", "backyard", "at")) == "delete ( player , backyard , at )");
  CHECK(render_op(add_op("red hot chili pepper", "counter", "on")) == "add ( red hot chili pepper , counter , on )");
}

TEST_CASE("render_sequence") {
  CHECK(texts(render_sequence({})) == std::vector<std::string>{"<eos>"});
  CHECK(texts(render_sequence({add_op("a", "b", "in")})) == texts(with_eos(tokenize("add ( a , b , in )"))));
  auto two = texts(render_sequence({add_op("a", "b", "in"), delete_op("c", "d", "on")}));
  auto expected = texts(tokenize("add ( a , b , in )"));
  expected.emplace_back("<sep>");
  for (auto& w : texts(tokenize("delete ( c , d , on )"))) expected.push_back(w);
  expected.emplace_back("<eos>");
  CHECK(two == expected);
}

TEST_CASE("parse_sequence") {
  const auto& reg = RelationRegistry::standard();
  CHECK(parse_sequence(render_sequence({}), reg) == ParsedSequence{{}, 0});
  auto tokens = make_tokens({"add", "(", "a", ",", "b", ",", "in", ")", "<sep>", "add", "(", "x", ")", "<sep>",
                             "delete", "(", "c", ",", "d", ",", "on", ")", "<eos>", "add", "(", "z"});
  auto parsed = parse_sequence(tokens, reg);
  CHECK(parsed.ops == UpdateSequence{add_op("a", "b", "in"), delete_op("c", "d", "on")});
  CHECK(parsed.malformed == 1);
  // no <eos>: the trailing segment is still parsed
  auto open = parse_sequence(make_tokens({"add", "(", "a", ",", "b", ",", "in", ")"}), reg);
  CHECK(open.ops.size() == 1);
  CHECK(parse_sequence(make_tokens({"<sep>", "<eos>"}), reg).malformed == 2);
}

TEST_CASE("render/parse round trip over random sequences") {
  const auto& reg = RelationRegistry::standard();
  const std::vector<std::string> words = {"red", "hot", "pepper", "shed", "player", "box", "green", "apple"};
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> w(0, words.size() - 1), r(0, reg.size() - 1);
  std::uniform_int_distribution<int> len(1, 3), n_ops(0, 6), coin(0, 1);
  auto label = [&] {
    std::string s = words[w(rng)];
    for (int i = 1, n = len(rng); i < n; ++i) s += " " + words[w(rng)];
    return s;
  };
  for (int trial = 0; trial < 500; ++trial) {
    UpdateSequence ops;
    for (int i = 0, n = n_ops(rng); i < n; ++i) {
      ops.push_back(coin(rng) ? add_op(label(), label(), reg.labels()[r(rng)])
                              : delete_op(label(), label(), reg.labels()[r(rng)]));
    }
    ops = canonical_order(ops);
    CHECK(parse_sequence(render_sequence(ops), reg) == ParsedSequence{ops, 0});
  }
}

TEST_CASE("vocabulary") {
  Vocabulary v;
  CHECK(v.size() == 5);
  CHECK(v.id("<pad>") == 0);
  CHECK(v.id("<sos>") == 1);
  CHECK(v.id("<eos>") == 2);
  CHECK(v.id("<sep>") == 3);
  CHECK(v.id("<unk>") == 4);
  auto id = v.add("shed");
  CHECK(id == 5);
  CHECK(v.add("shed") == 5);
  CHECK(v.token(5) == "shed");
  CHECK(v.id("nowhere") == Vocabulary::kUnkId);
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
}
