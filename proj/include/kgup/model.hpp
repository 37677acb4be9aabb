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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgup/command.hpp"
#include "kgup/graph.hpp"
#include "kgup/layers.hpp"
#include "kgup/world.hpp"

namespace kgup {

class TargetTooLong : public std::length_error {
 public:
  using std::length_error::length_error;
};

enum class EncoderVariant { none, gcn, rgcn, rgcn_rel };

/// CLI spellings: none, gcn, rgcn, rgcn-rel.
std::string_view to_string(EncoderVariant v);
/// Throws std::invalid_argument.
EncoderVariant parse_variant(std::string_view text);
/// GCN and the text-only baseline do not model relation types.
inline bool is_relational(EncoderVariant v) { return v == EncoderVariant::rgcn || v == EncoderVariant::rgcn_rel; }

struct ModelConfig {
  std::size_t hidden = 64;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t heads = 4;
  std::size_t graph_layers = 1;
  /// Adds the node-label features to the graph encoder output.
  bool graph_skip = true;
  EncoderVariant variant = EncoderVariant::none;
  Vocabulary vocab;
  std::size_t max_decode_len = 160;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Model input for one transition: the prior graph, A_{t-1} and O_t.
struct ModelInput {
  const BeliefGraph* graph = nullptr;
  std::string_view action;
  std::string_view observation;
};

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }
  const RelationRegistry& relations() const { return relations_; }

  struct Encoded {
    ad::Tensor text;    // h^OG, L x H
    ad::Tensor graph;   // h^GO, N x H (1 x H for the null row)
    ad::Tensor memory;  // decoder cross-attention memory [h^OG ; h^GO]
    std::vector<std::int32_t> source_ids;  // extended ids of the L source tokens
    std::vector<std::string> oov;          // words with ids V, V+1, ...
    std::size_t ext_size = 0;
  };
  Encoded encode(ad::Tape& tape, const ModelInput& input) const;

  /// Teacher-forced decoder output: T x ext_size log-probabilities for
  /// target tokens `targets` (decoder input is <sos> + targets[:-1]).
  ad::Tensor decode(ad::Tape& tape, const Encoded& enc, std::span<const std::int32_t> targets) const;

  /// Extended ids for a rendered target; words outside vocab and source map to <unk>.
  std::vector<std::int32_t> target_ids(const Encoded& enc, const TokenList& target) const;

  /// Mean token NLL of the canonical rendering of `gold`. Throws TargetTooLong.
  ad::Tensor loss(ad::Tape& tape, const ModelInput& input, const UpdateSequence& gold) const;
  ad::Tensor loss(ad::Tape& tape, const Transition& t) const;

  /// Greedy decoding with cached decoder states.
  TokenList generate_tokens(const ModelInput& input) const;
  /// Greedy decoding by re-running the full decoder each step. Slow; kept as
  /// a reference for generate_tokens.
  TokenList generate_tokens_reference(const ModelInput& input) const;
  ParsedSequence generate(const ModelInput& input) const;

 private:
  void build();
  ad::Tensor encode_graph(ad::Tape& tape, const BeliefGraph& graph, const ad::Tensor& embeddings) const;
  ad::Tensor embed_decoder(ad::Tape& tape, std::span<const std::int32_t> ids, std::size_t offset) const;
  std::string token_text(const Encoded& enc, std::int32_t id) const;

  ModelConfig config_;
  RelationRegistry relations_;
  nn::ParameterStore params_;

  ad::Tensor embedding_;
  std::vector<nn::EncoderBlock> encoder_;
  nn::LayerNorm encoder_norm_;
  std::vector<nn::GcnLayer> gcn_;
  std::vector<nn::RgcnLayer> rgcn_;
  ad::Tensor null_graph_row_;
  nn::Aggregator aggregator_;
  std::vector<nn::DecoderBlock> decoder_;
  nn::LayerNorm decoder_norm_;
  nn::PointerHead head_;
};

/// Rendered tokens of A_{t-1} <sep> O_t as the encoder reads them.
TokenList source_tokens(std::string_view action, std::string_view observation);

}  // namespace kgup
