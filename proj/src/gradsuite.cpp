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

#include "kgup/gradsuite.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include "kgup/layers.hpp"
#include "kgup/model.hpp"

namespace kgup {

namespace {

using ad::GradCheckOptions;
using ad::GradCheckReport;
using ad::NamedTensors;
using ad::Tape;
using ad::Tensor;

constexpr std::size_t kDim = 8;
constexpr std::size_t kHeads = 2;

struct Fixture {
  explicit Fixture(std::uint64_t seed) : store(seed), rng(seed ^ 0x9e3779b97f4a7c15ULL) {}

  Tensor input(const std::string& name, std::size_t rows, std::size_t cols) {
    auto t = Tensor::randn({rows, cols}, rng, 1.0f, true);
    inputs.emplace_back(name, t);
    return t;
  }

  GradCheckReport check(const std::function<Tensor(Tape&)>& f, std::uint64_t seed, std::size_t max_coords = 0) {
    NamedTensors all = inputs;
    for (const auto& p : store.all()) all.push_back(p);
    GradCheckOptions opt;
    opt.seed = seed;
    opt.max_coords = max_coords;
    return ad::grad_check(f, all, opt);
  }

  nn::ParameterStore store;
  std::mt19937_64 rng;
  NamedTensors inputs;
};

// player -> kitchen (at), fridge -> kitchen (at), fridge -> player (east_of)
BeliefGraph small_graph() {
  return BeliefGraph{make_triple("player", "kitchen", "at"), make_triple("fridge", "kitchen", "at"),
                     make_triple("fridge", "player", "east_of")};
}

Vocabulary small_vocab() {
  Vocabulary v;
  for (const auto& w : {"add", "delete", "(", ")", ",", "player", "kitchen", "fridge", "open", "closed", "you",
                        "the", ".", "in", "at", "is", "east", "west", "of", "east_of", "west_of"}) {
    v.add(w);
  }
  return v;
}

GradCheckReport embedding_check(std::uint64_t seed) {
  Fixture fx(seed);
  auto table = fx.store.create("embedding", 12, kDim, nn::Init::normal);
  std::uniform_int_distribution<std::int32_t> pick(0, 11);
  std::vector<std::int32_t> ids(5);
  for (auto& id : ids) id = pick(fx.rng);
  std::vector<std::vector<std::int32_t>> bags{{pick(fx.rng)}, {pick(fx.rng), pick(fx.rng), pick(fx.rng)}};
  const float s = std::sqrt(static_cast<float>(kDim));
  return fx.check(
      [&](Tape& t) {
        auto text = ad::add(t, ad::scale(t, ad::embedding_lookup(t, table, ids), s),
                            nn::positional_encoding(ids.size(), kDim));
        auto nodes = ad::scale(t, ad::embedding_bag_mean(t, table, bags), s);
        return ad::concat_rows(t, std::vector<Tensor>{text, nodes});
      },
      seed);
}

GradCheckReport attention_check(std::uint64_t seed) {
  Fixture fx(seed);
  auto mha = nn::MultiHeadAttention::create(fx.store, "attention", kDim, kHeads);
  auto q = fx.input("q", 2, kDim);
  auto kv = fx.input("kv", 3, kDim);
  ad::Mask mask(2 * 3, 0.0f);
  mask[2] = -std::numeric_limits<float>::infinity();
  return fx.check([&](Tape& t) { return mha(t, q, kv, &mask); }, seed);
}

GradCheckReport encoder_block_check(std::uint64_t seed) {
  Fixture fx(seed);
  auto block = nn::EncoderBlock::create(fx.store, "encoder", kDim, kHeads);
  auto x = fx.input("x", 3, kDim);
  return fx.check([&](Tape& t) { return block(t, x); }, seed);
}

GradCheckReport decoder_block_check(std::uint64_t seed) {
  Fixture fx(seed);
  auto block = nn::DecoderBlock::create(fx.store, "decoder", kDim, kHeads);
  auto x = fx.input("x", 3, kDim);
  auto memory = fx.input("memory", 4, kDim);
  return fx.check([&](Tape& t) { return block(t, x, memory); }, seed);
}

GradCheckReport decoder_cached_check(std::uint64_t seed) {
  Fixture fx(seed);
  auto block = nn::DecoderBlock::create(fx.store, "decoder", kDim, kHeads);
  auto x = fx.input("x", 3, kDim);
  auto memory = fx.input("memory", 4, kDim);
  return fx.check(
      [&](Tape& t) {
        auto cache = block.start(t, memory);
        std::vector<Tensor> rows;
        for (std::size_t i = 0; i < x.rows(); ++i) rows.push_back(block.step(t, ad::slice_rows(t, x, i, 1), cache));
        return ad::concat_rows(t, rows);
      },
      seed);
}

GradCheckReport gcn_check(std::uint64_t seed) {
  Fixture fx(seed);
  auto layer = nn::GcnLayer::create(fx.store, "gcn", kDim);
  auto batch = nn::make_graph_batch(small_graph(), small_vocab(), RelationRegistry::standard());
  auto adjacency = nn::gcn_adjacency(batch);
  auto h = fx.input("h", batch.num_nodes(), kDim);
  return fx.check([&](Tape& t) { return layer(t, adjacency, h); }, seed);
}

GradCheckReport rgcn_check(std::uint64_t seed, bool relation_embeddings) {
  Fixture fx(seed);
  const auto& relations = RelationRegistry::standard();
  auto layer = nn::RgcnLayer::create(fx.store, "rgcn", kDim, relations.size(), relation_embeddings);
  const auto vocab = small_vocab();
  auto batch = nn::make_graph_batch(small_graph(), vocab, relations);
  auto adjacency = nn::rgcn_adjacency(batch);
  auto h = fx.input("h", batch.num_nodes(), kDim);
  Tensor table;
  if (relation_embeddings) table = fx.store.create("embedding", vocab.size(), kDim, nn::Init::normal);
  return fx.check(
      [&](Tape& t) {
        if (!relation_embeddings) return layer(t, adjacency, h);
        auto rel = ad::embedding_bag_mean(t, table, batch.relation_tokens);
        return layer(t, adjacency, h, &rel);
      },
      seed);
}

GradCheckReport aggregator_check(std::uint64_t seed) {
  Fixture fx(seed);
  auto agg = nn::Aggregator::create(fx.store, "aggregator", kDim);
  auto text = fx.input("text", 4, kDim);
  auto graph = fx.input("graph", 3, kDim);
  return fx.check(
      [&](Tape& t) {
        auto [og, go] = agg(t, text, graph);
        return ad::concat_rows(t, std::vector<Tensor>{og, go});
      },
      seed);
}

GradCheckReport pointer_check(std::uint64_t seed) {
  Fixture fx(seed);
  constexpr std::size_t kVocab = 6;
  auto head = nn::PointerHead::create(fx.store, "pointer", kDim, kVocab);
  auto dec = fx.input("dec", 3, kDim);
  auto source = fx.input("source", 5, kDim);
  // id 6 is a source word outside the vocabulary; id 2 repeats
  const std::vector<std::int32_t> source_ids{2, 6, 2, 0, 4};
  return fx.check([&](Tape& t) { return head(t, dec, source, source_ids, kVocab + 1); }, seed);
}

GradCheckReport model_check(std::uint64_t seed, EncoderVariant variant) {
  ModelConfig config;
  config.hidden = kDim;
  config.heads = kHeads;
  config.enc_layers = 1;
  config.dec_layers = 1;
  config.graph_layers = 1;
  config.variant = variant;
  config.vocab = small_vocab();
  config.seed = seed;
  Model model(config);
  const auto graph = small_graph();
  // "apple" is outside the vocabulary and reaches the target only by copying
  const UpdateSequence gold{add_op("fridge", "open", "is"), add_op("apple", "fridge", "in"),
                            delete_op("fridge", "closed", "is")};
  GradCheckOptions opt;
  opt.seed = seed;
  opt.max_coords = 6;
  return ad::grad_check(
      [&](Tape& t) {
        return model.loss(t, {&graph, "open fridge", "You open the fridge. Inside you see an apple."}, gold);
      },
      model.params().all(), opt);
}

const std::map<std::string, std::function<GradCheckReport(std::uint64_t)>>& registry() {
  static const std::map<std::string, std::function<GradCheckReport(std::uint64_t)>> blocks = {
      {"embedding", embedding_check},
      {"attention", attention_check},
      {"encoder_block", encoder_block_check},
      {"decoder_block", decoder_block_check},
      {"decoder_block_cached", decoder_cached_check},
      {"gcn", gcn_check},
      {"rgcn", [](std::uint64_t s) { return rgcn_check(s, false); }},
      {"rgcn_rel", [](std::uint64_t s) { return rgcn_check(s, true); }},
      {"aggregator", aggregator_check},
      {"pointer_softmax", pointer_check},
      {"model_none", [](std::uint64_t s) { return model_check(s, EncoderVariant::none); }},
      {"model_gcn", [](std::uint64_t s) { return model_check(s, EncoderVariant::gcn); }},
      {"model_rgcn", [](std::uint64_t s) { return model_check(s, EncoderVariant::rgcn); }},
      {"model_rgcn_rel", [](std::uint64_t s) { return model_check(s, EncoderVariant::rgcn_rel); }},
  };
  return blocks;
}

}  // namespace

const std::vector<std::string>& gradient_suite_blocks() {
  static const std::vector<std::string> names = {
      "embedding", "attention",       "encoder_block", "decoder_block", "decoder_block_cached",
      "gcn",       "rgcn",            "rgcn_rel",      "aggregator",    "pointer_softmax",
      "model_none", "model_gcn", "model_rgcn", "model_rgcn_rel"};
  return names;
}

GradCheckReport check_block(const std::string& block, std::uint64_t seed) {
  const auto& blocks = registry();
  auto it = blocks.find(block);
  if (it == blocks.end()) throw std::invalid_argument("unknown gradient-check block '" + block + "'");
  return it->second(seed);
}

}  // namespace kgup
