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

#include "kgup/layers.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace kgup::nn {

using namespace ad;

Tensor ParameterStore::create(const std::string& name, std::size_t rows, std::size_t cols, Init init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Tensor t;
  switch (init) {
    case Init::xavier:
      t = Tensor::xavier(rows, cols, rng_);
      break;
    case Init::zeros:
      t = Tensor::zeros({rows, cols}, true);
      break;
    case Init::ones:
      t = Tensor::from({rows, cols}, std::vector<float>(rows * cols, 1.0f), true);
      break;
    case Init::normal:
      t = Tensor::randn({rows, cols}, rng_, 0.1f, true);
      break;
  }
  index_[name] = params_.size();
  params_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return params_[it->second].second;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

std::size_t ParameterStore::count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) {
    if (name.rfind(prefix, 0) == 0) n += t.size();
  }
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias,
                      Init init) {
  Linear l;
  l.weight = store.create(name + ".weight", in, out, init);
  if (bias) l.bias = store.create(name + ".bias", 1, out, Init::zeros);
  return l;
}

Tensor Linear::operator()(Tape& tape, const Tensor& x) const {
  auto y = matmul(tape, x, weight);
  return bias.defined() ? add_row(tape, y, bias) : y;
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, std::size_t dim) {
  return {store.create(name + ".gamma", 1, dim, Init::ones), store.create(name + ".beta", 1, dim, Init::zeros)};
}

Tensor LayerNorm::operator()(Tape& tape, const Tensor& x) const { return layer_norm(tape, x, gamma, beta); }

FeedForward FeedForward::create(ParameterStore& store, const std::string& name, std::size_t dim,
                                std::size_t hidden) {
  return {Linear::create(store, name + ".in", dim, hidden), Linear::create(store, name + ".out", hidden, dim)};
}

Tensor FeedForward::operator()(Tape& tape, const Tensor& x) const { return out(tape, gelu(tape, in(tape, x))); }

MultiHeadAttention MultiHeadAttention::create(ParameterStore& store, const std::string& name, std::size_t dim,
                                              std::size_t n_heads) {
  if (n_heads == 0 || dim % n_heads != 0) {
    throw ShapeMismatch("hidden size " + std::to_string(dim) + " not divisible by " + std::to_string(n_heads) +
                        " heads");
  }
  MultiHeadAttention m;
  m.query = Linear::create(store, name + ".query", dim, dim);
  m.key = Linear::create(store, name + ".key", dim, dim);
  m.value = Linear::create(store, name + ".value", dim, dim);
  m.output = Linear::create(store, name + ".output", dim, dim);
  m.n_heads = n_heads;
  return m;
}

KeyValue MultiHeadAttention::project(Tape& tape, const Tensor& memory) const {
  return {key(tape, memory), value(tape, memory)};
}

Tensor MultiHeadAttention::attend(Tape& tape, const Tensor& q, const KeyValue& kv, const Mask* mask) const {
  const std::size_t dim = query.weight.cols();
  if (q.cols() != dim) throw ShapeMismatch("attention query " + shape_string(q.shape()) + " for hidden size " +
                                           std::to_string(dim));
  const std::size_t d = dim / n_heads;
  const float inv = 1.0f / std::sqrt(static_cast<float>(d));
  auto qp = query(tape, q);
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    auto qh = n_heads == 1 ? qp : slice_cols(tape, qp, h * d, d);
    auto kh = n_heads == 1 ? kv.keys : slice_cols(tape, kv.keys, h * d, d);
    auto vh = n_heads == 1 ? kv.values : slice_cols(tape, kv.values, h * d, d);
    auto weights = softmax(tape, scale(tape, matmul_nt(tape, qh, kh), inv), mask);
    heads.push_back(matmul(tape, weights, vh));
  }
  auto joined = n_heads == 1 ? heads.front() : concat_cols(tape, heads);
  return output(tape, joined);
}

EncoderBlock EncoderBlock::create(ParameterStore& store, const std::string& name, std::size_t dim,
                                  std::size_t n_heads) {
  return {LayerNorm::create(store, name + ".norm1", dim),
          MultiHeadAttention::create(store, name + ".attention", dim, n_heads),
          LayerNorm::create(store, name + ".norm2", dim), FeedForward::create(store, name + ".ffn", dim, 2 * dim)};
}

Tensor EncoderBlock::operator()(Tape& tape, const Tensor& x) const {
  auto n = norm1(tape, x);
  auto h = add(tape, x, attention(tape, n, n));
  return add(tape, h, ffn(tape, norm2(tape, h)));
}

DecoderBlock DecoderBlock::create(ParameterStore& store, const std::string& name, std::size_t dim,
                                  std::size_t n_heads) {
  return {LayerNorm::create(store, name + ".norm1", dim),
          MultiHeadAttention::create(store, name + ".self_attention", dim, n_heads),
          LayerNorm::create(store, name + ".norm2", dim),
          MultiHeadAttention::create(store, name + ".cross_attention", dim, n_heads),
          LayerNorm::create(store, name + ".norm3", dim), FeedForward::create(store, name + ".ffn", dim, 2 * dim)};
}

Tensor DecoderBlock::operator()(Tape& tape, const Tensor& x, const Tensor& memory) const {
  auto mask = causal_mask(x.rows());
  auto n = norm1(tape, x);
  auto h = add(tape, x, self_attention(tape, n, n, &mask));
  h = add(tape, h, cross_attention(tape, norm2(tape, h), memory));
  return add(tape, h, ffn(tape, norm3(tape, h)));
}

DecoderCache DecoderBlock::start(Tape& tape, const Tensor& memory) const {
  DecoderCache cache;
  cache.memory = cross_attention.project(tape, memory);
  return cache;
}

Tensor DecoderBlock::step(Tape& tape, const Tensor& x, DecoderCache& cache) const {
  auto n = norm1(tape, x);
  auto k = self_attention.key(tape, n);
  auto v = self_attention.value(tape, n);
  if (cache.self_keys.defined()) {
    cache.self_keys = concat_rows(tape, std::vector<Tensor>{cache.self_keys, k});
    cache.self_values = concat_rows(tape, std::vector<Tensor>{cache.self_values, v});
  } else {
    cache.self_keys = k;
    cache.self_values = v;
  }
  auto h = add(tape, x, self_attention.attend(tape, n, {cache.self_keys, cache.self_values}));
  h = add(tape, h, cross_attention.attend(tape, norm2(tape, h), cache.memory));
  return add(tape, h, ffn(tape, norm3(tape, h)));
}

namespace {

std::vector<std::int32_t> label_ids(const std::string& label, const Vocabulary& vocab, char separator) {
  std::vector<std::int32_t> ids;
  std::size_t start = 0;
  while (start <= label.size()) {
    auto end = label.find(separator, start);
    if (end == std::string::npos) end = label.size();
    if (end > start) ids.push_back(vocab.id(label.substr(start, end - start)));
    start = end + 1;
  }
  if (ids.empty()) ids.push_back(Vocabulary::kUnkId);
  return ids;
}

}  // namespace

GraphBatch make_graph_batch(const BeliefGraph& graph, const Vocabulary& vocab, const RelationRegistry& relations) {
  GraphBatch batch;
  batch.n_relations = relations.size();
  for (const auto& label : relations.labels()) batch.relation_tokens.push_back(label_ids(label, vocab, '_'));
  std::map<std::string, std::size_t> index;
  for (const auto& v : graph.vertices()) {
    index[v.label] = batch.node_labels.size();
    batch.node_labels.push_back(v.label);
    batch.node_tokens.push_back(label_ids(v.label, vocab, ' '));
  }
  for (const auto& t : graph.triples()) {
    batch.edges.push_back({index.at(t.head.label), index.at(t.tail.label), relations.index_of(t.relation.label())});
  }
  return batch;
}

SparseMatrix gcn_adjacency(const GraphBatch& graph) {
  const std::size_t n = graph.num_nodes();
  std::set<std::pair<std::size_t, std::size_t>> links;
  for (std::size_t i = 0; i < n; ++i) links.emplace(i, i);
  for (const auto& e : graph.edges) {
    links.emplace(e.head, e.tail);
    links.emplace(e.tail, e.head);
  }
  std::vector<double> degree(n, 0.0);
  for (const auto& [i, j] : links) degree[i] += 1.0;
  SparseMatrix m{n, n, {}};
  for (const auto& [i, j] : links) {
    m.entries.push_back({i, j, static_cast<float>(1.0 / std::sqrt(degree[i] * degree[j]))});
  }
  return m;
}

std::vector<SparseMatrix> rgcn_adjacency(const GraphBatch& graph) {
  const std::size_t n = graph.num_nodes();
  const std::size_t r = graph.n_relations;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairs(2 * r);
  for (const auto& e : graph.edges) {
    pairs[e.relation].emplace_back(e.tail, e.head);     // tail receives from head
    pairs[r + e.relation].emplace_back(e.head, e.tail);  // inverse direction
  }
  std::vector<SparseMatrix> out;
  out.reserve(2 * r);
  for (const auto& list : pairs) {
    SparseMatrix m{n, n, {}};
    std::vector<std::size_t> count(n, 0);
    for (const auto& [row, col] : list) ++count[row];
    for (const auto& [row, col] : list) m.entries.push_back({row, col, 1.0f / static_cast<float>(count[row])});
    out.push_back(std::move(m));
  }
  return out;
}

GcnLayer GcnLayer::create(ParameterStore& store, const std::string& name, std::size_t dim) {
  return {store.create(name + ".weight", dim, dim)};
}

Tensor GcnLayer::operator()(Tape& tape, const SparseMatrix& adjacency, const Tensor& h, bool activate) const {
  auto out = sparse_matmul(tape, adjacency, matmul(tape, h, weight));
  return activate ? relu(tape, out) : out;
}

RgcnLayer RgcnLayer::create(ParameterStore& store, const std::string& name, std::size_t dim,
                            std::size_t n_relations, bool relation_embeddings) {
  RgcnLayer l;
  l.relation_embeddings = relation_embeddings;
  l.self_weight = store.create(name + ".self.weight", dim, dim);
  const std::size_t in = relation_embeddings ? 2 * dim : dim;
  for (std::size_t r = 0; r < 2 * n_relations; ++r) {
    l.relation_weights.push_back(store.create(name + ".relation" + std::to_string(r) + ".weight", in, dim));
  }
  return l;
}

Tensor RgcnLayer::operator()(Tape& tape, const std::vector<SparseMatrix>& adjacency, const Tensor& h,
                             const Tensor* relation_emb, bool activate) const {
  if (adjacency.size() != relation_weights.size()) {
    throw ShapeMismatch("rgcn layer has " + std::to_string(relation_weights.size()) + " relation weights, got " +
                        std::to_string(adjacency.size()) + " adjacency matrices");
  }
  if (relation_embeddings && relation_emb == nullptr) throw ShapeMismatch("rgcn layer needs relation embeddings");
  const std::size_t n_base = relation_weights.size() / 2;
  auto out = matmul(tape, h, self_weight);
  for (std::size_t r = 0; r < adjacency.size(); ++r) {
    if (adjacency[r].entries.empty()) continue;
    Tensor message = h;
    if (relation_embeddings) {
      auto e = slice_rows(tape, *relation_emb, r % n_base, 1);
      message = concat_cols(tape, std::vector<Tensor>{h, repeat_rows(tape, e, h.rows())});
    }
    out = add(tape, out, sparse_matmul(tape, adjacency[r], matmul(tape, message, relation_weights[r])));
  }
  return activate ? relu(tape, out) : out;
}

Aggregator Aggregator::create(ParameterStore& store, const std::string& name, std::size_t dim) {
  return {Linear::create(store, name + ".text_proj", 2 * dim, dim),
          Linear::create(store, name + ".graph_proj", 2 * dim, dim)};
}

std::pair<Tensor, Tensor> Aggregator::operator()(Tape& tape, const Tensor& h_text, const Tensor& h_graph) const {
  if (h_text.cols() != h_graph.cols()) {
    throw ShapeMismatch("aggregate: text " + shape_string(h_text.shape()) + " vs graph " +
                        shape_string(h_graph.shape()));
  }
  const float inv = 1.0f / std::sqrt(static_cast<float>(h_text.cols()));
  auto s = scale(tape, matmul_nt(tape, h_graph, h_text), inv);                   // N x L
  auto graph_over_text = matmul(tape, softmax(tape, s), h_text);                 // N x H
  auto text_over_graph = matmul(tape, softmax(tape, transpose(tape, s)), h_graph);  // L x H
  auto og = text_proj(tape, concat_cols(tape, std::vector<Tensor>{h_text, text_over_graph}));
  auto go = graph_proj(tape, concat_cols(tape, std::vector<Tensor>{h_graph, graph_over_text}));
  return {og, go};
}

Tensor pointer_softmax(Tape& tape, const Tensor& gate_logits, const Tensor& attn, const Tensor& vocab_logits,
                       std::span<const std::int32_t> source_ids, std::size_t ext_size) {
  auto mix = pointer_mix(tape, sigmoid(tape, gate_logits), softmax(tape, vocab_logits), attn, source_ids, ext_size);
  return log_floor(tape, mix);
}

PointerHead PointerHead::create(ParameterStore& store, const std::string& name, std::size_t dim,
                                std::size_t vocab_size) {
  return {Linear::create(store, name + ".vocab", dim, vocab_size),
          Linear::create(store, name + ".copy_query", dim, dim), Linear::create(store, name + ".gate", dim, 1)};
}

Tensor PointerHead::copy_attention(Tape& tape, const Tensor& dec_states, const Tensor& source_states) const {
  const float inv = 1.0f / std::sqrt(static_cast<float>(dec_states.cols()));
  return softmax(tape, scale(tape, matmul_nt(tape, copy_query(tape, dec_states), source_states), inv));
}

Tensor PointerHead::operator()(Tape& tape, const Tensor& dec_states, const Tensor& source_states,
                               std::span<const std::int32_t> source_ids, std::size_t ext_size) const {
  return pointer_softmax(tape, gate(tape, dec_states), copy_attention(tape, dec_states, source_states),
                         vocab(tape, dec_states), source_ids, ext_size);
}

Tensor positional_encoding(std::size_t n, std::size_t dim, std::size_t offset) {
  auto t = Tensor::zeros({n, dim});
  auto d = t.data();
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t i = 0; i < dim; i += 2) {
      double angle = static_cast<double>(p + offset) / std::pow(10000.0, static_cast<double>(i) / dim);
      d[p * dim + i] = static_cast<float>(std::sin(angle));
      if (i + 1 < dim) d[p * dim + i + 1] = static_cast<float>(std::cos(angle));
    }
  }
  return t;
}

}  // namespace kgup::nn
