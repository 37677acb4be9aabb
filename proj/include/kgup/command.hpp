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
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgup/graph.hpp"

namespace kgup {

class MalformedCommand : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kPad = "<pad>";
inline constexpr std::string_view kSos = "<sos>";
inline constexpr std::string_view kEos = "<eos>";
inline constexpr std::string_view kSep = "<sep>";
inline constexpr std::string_view kUnk = "<unk>";

struct Token {
  std::string text;
  std::optional<std::size_t> source_index;

  friend bool operator==(const Token& a, const Token& b) { return a.text == b.text; }
};

using TokenList = std::vector<Token>;

/// Lowercases, splits on whitespace and splits `(`, `)` and `,` into their
/// own tokens. source_index is the token's ordinal in the output.
TokenList tokenize(std::string_view text);

/// Tokenizer for free text (actions, observations): like tokenize() but also
/// splits sentence punctuation `. ; : ! ?` off words.
TokenList tokenize_text(std::string_view text);

std::vector<std::string> texts(const TokenList& tokens);
TokenList make_tokens(const std::vector<std::string>& words);
std::string join(const TokenList& tokens);

class Vocabulary {
 public:
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kSosId = 1;
  static constexpr std::int32_t kEosId = 2;
  static constexpr std::int32_t kSepId = 3;
  static constexpr std::int32_t kUnkId = 4;
  static constexpr std::int32_t kNumReserved = 5;

  Vocabulary();

  /// Returns the id of `token`, adding it if new.
  std::int32_t add(std::string_view token);
  bool contains(std::string_view token) const;
  /// <unk> id for unknown tokens.
  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

/// Parses one `verb ( head , tail , relation )` command.
/// Throws MalformedCommand or UnknownRelation.
UpdateOp parse_op(std::span<const Token> tokens, const RelationRegistry& relations);

std::string render_op(const UpdateOp& op);

/// Per-op token lists joined by <sep> and terminated by <eos>.
TokenList render_sequence(const UpdateSequence& ops);

struct ParsedSequence {
  UpdateSequence ops;
  std::size_t malformed = 0;

  friend bool operator==(const ParsedSequence&, const ParsedSequence&) = default;
};

/// Splits on <sep> up to the first <eos>; segments that fail to parse are
/// dropped and counted.
ParsedSequence parse_sequence(std::span<const Token> tokens, const RelationRegistry& relations);

}  // namespace kgup
