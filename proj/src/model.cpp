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

#include "kgup/model.hpp"

#include <algorithm>
#include <cmath>

namespace kgup {

using ad::Tape;
using ad::Tensor;

std::string_view to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::none: return "none";
    case EncoderVariant::gcn: return "gcn";
    case EncoderVariant::rgcn: return "rgcn";
    case EncoderVariant::rgcn_rel: return "rgcn-rel";
  }
  return "none";
}

EncoderVariant parse_variant(std::string_view text) {
  for (auto v : {EncoderVariant::none, EncoderVariant::gcn, EncoderVariant::rgcn, EncoderVariant::rgcn_rel}) {
    if (to_string(v) == text) return v;
  }
  throw std::invalid_argument("unknown encoder variant '" + std::string(text) +
                              "' (expected none, gcn, rgcn or rgcn-rel)");
}

void ModelConfig::validate() const {
  if (hidden == 0 || heads == 0 || hidden % heads != 0) {
    throw std::invalid_argument("hidden size " + std::to_string(hidden) + " must be a positive multiple of heads (" +
                                std::to_string(heads) + ")");
  }
  if (hidden % 2 != 0) throw std::invalid_argument("hidden size must be even");
  if (max_decode_len < 1) throw std::invalid_argument("max_decode_len must be >= 1");
  if (vocab.size() < static_cast<std::size_t>(Vocabulary::kNumReserved)) {
    throw std::invalid_argument("vocabulary lacks the reserved tokens");
  }
}

TokenList source_tokens(std::string_view action, std::string_view observation) {
  auto out = tokenize_text(action);
  out.push_back(Token{std::string(kSep), std::nullopt});
  for (auto& t : tokenize_text(observation)) out.push_back(std::move(t));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].source_index = i;
  return out;
}

Model::Model(ModelConfig config)
    : config_(std::move(config)), relations_(RelationRegistry::standard()), params_(config_.seed) {
  config_.validate();
  build();
}

void Model::build() {
  const std::size_t h = config_.hidden;
  embedding_ = params_.create("embedding", config_.vocab.size(), h, nn::Init::normal);
  for (std::size_t l = 0; l < config_.enc_layers; ++l) {
    encoder_.push_back(nn::EncoderBlock::create(params_, "encoder.layer" + std::to_string(l), h, config_.heads));
  }
  encoder_norm_ = nn::LayerNorm::create(params_, "encoder.norm", h);
  for (std::size_t l = 0; l < config_.graph_layers; ++l) {
    const std::string name = "graph_encoder.layer" + std::to_string(l);
    switch (config_.variant) {
      case EncoderVariant::none: break;
      case EncoderVariant::gcn: gcn_.push_back(nn::GcnLayer::create(params_, name, h)); break;
      case EncoderVariant::rgcn:
      case EncoderVariant::rgcn_rel:
        rgcn_.push_back(nn::RgcnLayer::create(params_, name, h, relations_.size(),
                                              config_.variant == EncoderVariant::rgcn_rel));
        break;
    }
  }
  null_graph_row_ = params_.create("aggregator.null_graph_row", 1, h, nn::Init::normal);
  aggregator_ = nn::Aggregator::create(params_, "aggregator", h);
  for (std::size_t l = 0; l < config_.dec_layers; ++l) {
    decoder_.push_back(nn::DecoderBlock::create(params_, "decoder.layer" + std::to_string(l), h, config_.heads));
  }
  decoder_norm_ = nn::LayerNorm::create(params_, "decoder.norm", h);
  head_ = nn::PointerHead::create(params_, "pointer", h, config_.vocab.size());
}

Tensor Model::encode_graph(Tape& tape, const BeliefGraph& graph, const Tensor& embeddings) const {
  if (config_.variant == EncoderVariant::none || graph.empty()) return null_graph_row_;
  const float s = std::sqrt(static_cast<float>(config_.hidden));
  auto batch = nn::make_graph_batch(graph, config_.vocab, relations_);
  const auto x = ad::scale(tape, ad::embedding_bag_mean(tape, embeddings, batch.node_tokens), s);
  auto h = x;
  if (config_.variant == EncoderVariant::gcn) {
    auto adjacency = nn::gcn_adjacency(batch);
    for (const auto& layer : gcn_) h = layer(tape, adjacency, h);
  } else {
    auto adjacency = nn::rgcn_adjacency(batch);
    Tensor rel;
    if (config_.variant == EncoderVariant::rgcn_rel) {
      rel = ad::scale(tape, ad::embedding_bag_mean(tape, embeddings, batch.relation_tokens), s);
    }
    for (const auto& layer : rgcn_) h = layer(tape, adjacency, h, rel.defined() ? &rel : nullptr);
  }
  // Symmetric GCN normalization leaves a hub node only 1/degree of its own
  // features; the skip keeps every node's label recoverable.
  return config_.graph_skip ? ad::add(tape, x, h) : h;
}

Model::Encoded Model::encode(Tape& tape, const ModelInput& input) const {
  static const BeliefGraph kEmpty;
  const BeliefGraph& graph = input.graph != nullptr ? *input.graph : kEmpty;
  const auto& vocab = config_.vocab;
  const auto v = static_cast<std::int32_t>(vocab.size());

  Encoded enc;
  auto tokens = source_tokens(input.action, input.observation);
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (vocab.contains(t.text)) {
      ids.push_back(vocab.id(t.text));
      enc.source_ids.push_back(vocab.id(t.text));
      continue;
    }
    ids.push_back(Vocabulary::kUnkId);
    auto it = std::find(enc.oov.begin(), enc.oov.end(), t.text);
    if (it == enc.oov.end()) {
      enc.oov.push_back(t.text);
      it = enc.oov.end() - 1;
    }
    enc.source_ids.push_back(v + static_cast<std::int32_t>(it - enc.oov.begin()));
  }
  enc.ext_size = vocab.size() + enc.oov.size();

  const float s = std::sqrt(static_cast<float>(config_.hidden));
  auto x = ad::add(tape, ad::scale(tape, ad::embedding_lookup(tape, embedding_, ids), s),
                   nn::positional_encoding(ids.size(), config_.hidden));
  for (const auto& block : encoder_) x = block(tape, x);
  auto h_text = encoder_norm_(tape, x);
  auto h_graph = encode_graph(tape, graph, embedding_);
  auto [og, go] = aggregator_(tape, h_text, h_graph);
  enc.text = og;
  enc.graph = go;
  enc.memory = ad::concat_rows(tape, std::vector<Tensor>{og, go});
  return enc;
}

Tensor Model::embed_decoder(Tape& tape, std::span<const std::int32_t> ids, std::size_t offset) const {
  std::vector<std::int32_t> in(ids.begin(), ids.end());
  for (auto& id : in) {
    if (id >= static_cast<std::int32_t>(config_.vocab.size())) id = Vocabulary::kUnkId;
  }
  const float s = std::sqrt(static_cast<float>(config_.hidden));
  return ad::add(tape, ad::scale(tape, ad::embedding_lookup(tape, embedding_, in), s),
                 nn::positional_encoding(in.size(), config_.hidden, offset));
}

Tensor Model::decode(Tape& tape, const Encoded& enc, std::span<const std::int32_t> targets) const {
  std::vector<std::int32_t> input{Vocabulary::kSosId};
  input.insert(input.end(), targets.begin(), targets.end());
  input.pop_back();
  auto x = embed_decoder(tape, input, 0);
  for (const auto& block : decoder_) x = block(tape, x, enc.memory);
  x = decoder_norm_(tape, x);
  return head_(tape, x, enc.text, enc.source_ids, enc.ext_size);
}

std::vector<std::int32_t> Model::target_ids(const Encoded& enc, const TokenList& target) const {
  std::vector<std::int32_t> ids;
  ids.reserve(target.size());
  const auto v = static_cast<std::int32_t>(config_.vocab.size());
  for (const auto& t : target) {
    if (config_.vocab.contains(t.text)) {
      ids.push_back(config_.vocab.id(t.text));
      continue;
    }
    auto it = std::find(enc.oov.begin(), enc.oov.end(), t.text);
    ids.push_back(it == enc.oov.end() ? Vocabulary::kUnkId : v + static_cast<std::int32_t>(it - enc.oov.begin()));
  }
  return ids;
}

Tensor Model::loss(Tape& tape, const ModelInput& input, const UpdateSequence& gold) const {
  auto target = render_sequence(gold);
  if (target.size() > config_.max_decode_len) {
    throw TargetTooLong("target of " + std::to_string(target.size()) + " tokens exceeds max_decode_len " +
                        std::to_string(config_.max_decode_len));
  }
  auto enc = encode(tape, input);
  auto ids = target_ids(enc, target);
  auto log_probs = decode(tape, enc, ids);
  return ad::nll_loss(tape, log_probs, ids, -1);
}

Tensor Model::loss(Tape& tape, const Transition& t) const {
  return loss(tape, {&t.g_seen_prev, t.action, t.observation}, t.gold_ops());
}

std::string Model::token_text(const Encoded& enc, std::int32_t id) const {
  const auto v = static_cast<std::int32_t>(config_.vocab.size());
  if (id < v) return config_.vocab.token(id);
  return enc.oov[static_cast<std::size_t>(id - v)];
}

namespace {

std::int32_t argmax_row(const Tensor& t, std::size_t row) {
  auto d = t.data();
  const std::size_t n = t.cols();
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (d[row * n + j] > d[row * n + best]) best = j;
  }
  return static_cast<std::int32_t>(best);
}

}  // namespace

TokenList Model::generate_tokens(const ModelInput& input) const {
  Tape tape = Tape::inference();
  auto enc = encode(tape, input);
  std::vector<nn::DecoderCache> caches;
  caches.reserve(decoder_.size());
  for (const auto& block : decoder_) caches.push_back(block.start(tape, enc.memory));
  TokenList out;
  std::int32_t prev = Vocabulary::kSosId;
  for (std::size_t t = 0; t < config_.max_decode_len; ++t) {
    auto x = embed_decoder(tape, std::span<const std::int32_t>(&prev, 1), t);
    for (std::size_t l = 0; l < decoder_.size(); ++l) x = decoder_[l].step(tape, x, caches[l]);
    x = decoder_norm_(tape, x);
    auto log_probs = head_(tape, x, enc.text, enc.source_ids, enc.ext_size);
    prev = argmax_row(log_probs, 0);
    out.push_back(Token{token_text(enc, prev), std::nullopt});
    if (prev == Vocabulary::kEosId) break;
  }
  return out;
}

TokenList Model::generate_tokens_reference(const ModelInput& input) const {
  Tape tape = Tape::inference();
  auto enc = encode(tape, input);
  TokenList out;
  std::vector<std::int32_t> ids;
  for (std::size_t t = 0; t < config_.max_decode_len; ++t) {
    // decode() drops the last target, so feed a placeholder for the next one
    auto in = ids;
    in.push_back(Vocabulary::kPadId);
    auto log_probs = decode(tape, enc, in);
    auto next = argmax_row(log_probs, t);
    ids.push_back(next);
    out.push_back(Token{token_text(enc, next), std::nullopt});
    if (next == Vocabulary::kEosId) break;
  }
  return out;
}

ParsedSequence Model::generate(const ModelInput& input) const {
  return parse_sequence(generate_tokens(input), relations_);
}

}  // namespace kgup
