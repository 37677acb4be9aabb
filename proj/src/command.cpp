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

#include "kgup/command.hpp"

#include <cctype>

namespace kgup {
namespace {

TokenList split(std::string_view text, std::string_view separators) {
  TokenList out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(Token{std::move(current), out.size()});
      current.clear();
    }
  };
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      flush();
    } else if (separators.find(c) != std::string_view::npos) {
      flush();
      out.push_back(Token{std::string(1, c), out.size()});
    } else {
      current.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  flush();
  return out;
}

bool is_reserved(std::string_view t) {
  return t == kPad || t == kSos || t == kEos || t == kSep || t == kUnk;
}

bool is_punct(std::string_view t) { return t == "(" || t == ")" || t == ","; }

}  // namespace

TokenList tokenize(std::string_view text) { return split(text, "(),"); }

TokenList tokenize_text(std::string_view text) { return split(text, "(),.;:!?"); }

std::vector<std::string> texts(const TokenList& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

TokenList make_tokens(const std::vector<std::string>& words) {
  TokenList out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(Token{w, std::nullopt});
  return out;
}

std::string join(const TokenList& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t.text;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (auto t : {kPad, kSos, kEos, kSep, kUnk}) add(t);
}

std::int32_t Vocabulary::add(std::string_view token) {
  std::string key(token);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  auto id = static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < static_cast<std::size_t>(kNumReserved) || tokens[0] != kPad || tokens[1] != kSos ||
      tokens[2] != kEos || tokens[3] != kSep || tokens[4] != kUnk) {
    throw std::invalid_argument("vocabulary must start with the reserved tokens");
  }
  Vocabulary v;
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

UpdateOp parse_op(std::span<const Token> tokens, const RelationRegistry& relations) {
  if (tokens.empty()) throw MalformedCommand("empty command");
  Verb verb;
  if (tokens[0].text == "add") {
    verb = Verb::add;
  } else if (tokens[0].text == "delete") {
    verb = Verb::del;
  } else {
    throw MalformedCommand("unknown verb '" + tokens[0].text + "'");
  }
  if (tokens.size() < 2 || tokens[1].text != "(") throw MalformedCommand("missing '(' after verb");
  if (tokens.back().text != ")") throw MalformedCommand("missing closing ')'");

  std::vector<std::string> slots(1);
  std::vector<std::size_t> slot_words(1, 0);
  for (std::size_t i = 2; i + 1 < tokens.size(); ++i) {
    const auto& t = tokens[i].text;
    if (t == ",") {
      slots.emplace_back();
      slot_words.push_back(0);
      continue;
    }
    if (is_punct(t) || is_reserved(t)) throw MalformedCommand("unexpected token '" + t + "' inside command");
    if (!slots.back().empty()) slots.back().push_back(' ');
    slots.back() += t;
    ++slot_words.back();
  }
  if (slots.size() != 3) {
    throw MalformedCommand("expected 3 arguments, got " + std::to_string(slots.size()));
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (slot_words[s] == 0) throw MalformedCommand("argument " + std::to_string(s + 1) + " is empty");
  }
  if (slot_words[2] != 1) throw UnknownRelation("unknown relation '" + slots[2] + "'");
  auto relation = relations.make(slots[2]);
  return UpdateOp{verb, Triple{Entity(slots[0]), Entity(slots[1]), relation}};
}

std::string render_op(const UpdateOp& op) {
  std::string out(to_string(op.verb));
  out += " ( ";
  out += op.triple.head.label;
  out += " , ";
  out += op.triple.tail.label;
  out += " , ";
  out += op.triple.relation.label();
  out += " )";
  return out;
}

TokenList render_sequence(const UpdateSequence& ops) {
  TokenList out;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (i > 0) out.push_back(Token{std::string(kSep), std::nullopt});
    for (auto& t : tokenize(render_op(ops[i]))) out.push_back(Token{std::move(t.text), std::nullopt});
  }
  out.push_back(Token{std::string(kEos), std::nullopt});
  for (std::size_t i = 0; i < out.size(); ++i) out[i].source_index = i;
  return out;
}

ParsedSequence parse_sequence(std::span<const Token> tokens, const RelationRegistry& relations) {
  std::size_t end = 0;
  while (end < tokens.size() && tokens[end].text != kEos) ++end;
  auto body = tokens.first(end);

  ParsedSequence result;
  if (body.empty()) return result;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i < body.size() && body[i].text != kSep) continue;
    try {
      result.ops.push_back(parse_op(body.subspan(start, i - start), relations));
    } catch (const MalformedCommand&) {
      ++result.malformed;
    } catch (const UnknownRelation&) {
      ++result.malformed;
    } catch (const InvalidLabel&) {
      ++result.malformed;
    }
    start = i + 1;
  }
  return result;
}

}  // namespace kgup
