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
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgup/command.hpp"
#include "kgup/graph.hpp"
#include "kgup/tensor.hpp"

namespace kgup::nn {

using ad::Mask;
using ad::Tape;
using ad::Tensor;

enum class Init { xavier, zeros, ones, normal };

/// Owns every trainable tensor under a dotted name, in creation order.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  /// Throws std::invalid_argument on a duplicate name.
  Tensor create(const std::string& name, std::size_t rows, std::size_t cols, Init init = Init::xavier);
  bool contains(const std::string& name) const { return index_.contains(name); }
  /// Throws std::out_of_range.
  Tensor get(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& all() const { return params_; }
  std::vector<Tensor> tensors() const;
  /// Number of scalars in parameters whose name starts with `prefix`.
  std::size_t count(const std::string& prefix = "") const;
  void zero_grad();

 private:
  std::mt19937_64 rng_;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::map<std::string, std::size_t> index_;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out, undefined when built without bias

  static Linear create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                       bool bias = true, Init init = Init::xavier);
  Tensor operator()(Tape& tape, const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm create(ParameterStore& store, const std::string& name, std::size_t dim);
  Tensor operator()(Tape& tape, const Tensor& x) const;
};

struct FeedForward {
  Linear in;
  Linear out;

  static FeedForward create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t hidden);
  Tensor operator()(Tape& tape, const Tensor& x) const;
};

/// Projected keys and values of an attention memory, reusable across queries.
struct KeyValue {
  Tensor keys;
  Tensor values;
};

struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  std::size_t n_heads = 1;

  /// Throws ad::ShapeMismatch unless dim is divisible by n_heads.
  static MultiHeadAttention create(ParameterStore& store, const std::string& name, std::size_t dim,
                                   std::size_t n_heads);
  KeyValue project(Tape& tape, const Tensor& memory) const;
  /// `mask` is Lq x Lk additive, or null.
  Tensor attend(Tape& tape, const Tensor& q, const KeyValue& kv, const Mask* mask = nullptr) const;
  Tensor operator()(Tape& tape, const Tensor& q, const Tensor& kv, const Mask* mask = nullptr) const {
    return attend(tape, q, project(tape, kv), mask);
  }
};

struct EncoderBlock {
  LayerNorm norm1;
  MultiHeadAttention attention;
  LayerNorm norm2;
  FeedForward ffn;

  static EncoderBlock create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t n_heads);
  Tensor operator()(Tape& tape, const Tensor& x) const;
};

/// Per-layer decoding state for incremental (one token at a time) decoding.
struct DecoderCache {
  Tensor self_keys;    // grows by one row per step
  Tensor self_values;
  KeyValue memory;
};

struct DecoderBlock {
  LayerNorm norm1;
  MultiHeadAttention self_attention;
  LayerNorm norm2;
  MultiHeadAttention cross_attention;
  LayerNorm norm3;
  FeedForward ffn;

  static DecoderBlock create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t n_heads);
  /// Full causal pass over all target positions.
  Tensor operator()(Tape& tape, const Tensor& x, const Tensor& memory) const;
  DecoderCache start(Tape& tape, const Tensor& memory) const;
  /// One new position (1 x H) attending to everything cached so far.
  Tensor step(Tape& tape, const Tensor& x, DecoderCache& cache) const;
};

/// Graph prepared for the encoders. Relation ids 0..R-1 are the registry
/// labels in head -> tail direction, R..2R-1 their inverses.
struct GraphBatch {
  struct Edge {
    std::size_t head;
    std::size_t tail;
    std::size_t relation;  // base id in [0, R)
  };
  std::vector<std::string> node_labels;
  std::vector<std::vector<std::int32_t>> node_tokens;
  std::vector<Edge> edges;
  std::size_t n_relations = 0;  // R
  std::vector<std::vector<std::int32_t>> relation_tokens;

  std::size_t num_nodes() const { return node_labels.size(); }
};

/// Throws UnknownRelation when a triple's relation is not in `relations`.
GraphBatch make_graph_batch(const BeliefGraph& graph, const Vocabulary& vocab, const RelationRegistry& relations);

/// Â = A + I over the undirected, relation-free view, normalized as
/// D^-1/2 Â D^-1/2.
ad::SparseMatrix gcn_adjacency(const GraphBatch& graph);
/// One matrix per relation id in [0, 2R): row i averages over N_r(i).
std::vector<ad::SparseMatrix> rgcn_adjacency(const GraphBatch& graph);

struct GcnLayer {
  Tensor weight;

  static GcnLayer create(ParameterStore& store, const std::string& name, std::size_t dim);
  Tensor operator()(Tape& tape, const ad::SparseMatrix& adjacency, const Tensor& h, bool activate = true) const;
};

struct RgcnLayer {
  Tensor self_weight;                 // W_0
  std::vector<Tensor> relation_weights;  // W_r for r in [0, 2R); (H or 2H) x H
  bool relation_embeddings = false;

  static RgcnLayer create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t n_relations,
                          bool relation_embeddings);
  /// `relation_emb` holds one row per base relation (R x H); required iff
  /// the layer uses relation embeddings.
  Tensor operator()(Tape& tape, const std::vector<ad::SparseMatrix>& adjacency, const Tensor& h,
                    const Tensor* relation_emb = nullptr, bool activate = true) const;
};

struct Aggregator {
  Linear text_proj;   // [h_text ; h^OG] -> H
  Linear graph_proj;  // [h_graph ; h^GO] -> H

  static Aggregator create(ParameterStore& store, const std::string& name, std::size_t dim);
  /// Returns (h^OG: L x H, h^GO: N x H).
  std::pair<Tensor, Tensor> operator()(Tape& tape, const Tensor& h_text, const Tensor& h_graph) const;
};

/// g * softmax(vocab_logits) + (1 - g) * copy(attn), logged with a 1e-12
/// floor. gate_logits: T x 1, attn: T x L (rows sum to one), vocab_logits:
/// T x V, source_ids: L ids in the extended vocabulary [0, ext_size).
Tensor pointer_softmax(Tape& tape, const Tensor& gate_logits, const Tensor& attn, const Tensor& vocab_logits,
                       std::span<const std::int32_t> source_ids, std::size_t ext_size);

struct PointerHead {
  Linear vocab;      // H -> V
  Linear copy_query; // H -> H
  Linear gate;       // H -> 1

  static PointerHead create(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t vocab_size);
  /// Copy attention of decoder states over the source rows.
  Tensor copy_attention(Tape& tape, const Tensor& dec_states, const Tensor& source_states) const;
  /// Log-distribution over the extended vocabulary, T x ext_size.
  Tensor operator()(Tape& tape, const Tensor& dec_states, const Tensor& source_states,
                    std::span<const std::int32_t> source_ids, std::size_t ext_size) const;
};

/// Sinusoidal position encodings, rows [offset, offset + n).
Tensor positional_encoding(std::size_t n, std::size_t dim, std::size_t offset = 0);

}  // namespace kgup::nn
