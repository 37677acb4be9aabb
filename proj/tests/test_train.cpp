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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "kgup/checkpoint.hpp"
#include "kgup/dataset.hpp"
#include "kgup/eval.hpp"
#include "kgup/train.hpp"

using namespace kgup;
namespace fs = std::filesystem;

namespace {

struct Data {
  std::vector<Transition> train, valid;
  Vocabulary vocab;
};

const Data& data() {
  static const Data d = [] {
    auto corpus = generate_corpus(WorldConfig::defaults(), {2, 1, 0}, 21);
    Data out;
    auto all = flatten(corpus.train);
    for (const auto& t : all) {
      if (out.train.size() < 10 && render_sequence(t.gold_ops()).size() <= 40) out.train.push_back(t);
    }
    out.valid = strided_subset(flatten(corpus.valid), 12);
    out.vocab = build_vocab(all);
    return out;
  }();
  return d;
}

ModelConfig small(EncoderVariant v) {
  ModelConfig c;
  c.hidden = 16;
  c.heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.variant = v;
  c.vocab = data().vocab;
  c.max_decode_len = 48;
  c.seed = 2;
  return c;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("kgup_test_" + name); }

}  // namespace

TEST_CASE("strided subsets") {
  std::vector<Transition> ts(10);
  for (int i = 0; i < 10; ++i) ts[i].step = i;
  auto sub = strided_subset(ts, 3);
  REQUIRE(sub.size() == 3);
  CHECK(sub[0].step == 0);
  CHECK(sub[1].step == 3);
  CHECK(sub[2].step == 6);
  CHECK(strided_subset(ts, 0).size() == 10);
  CHECK(strided_subset(ts, 50).size() == 10);
}

TEST_CASE("training loss halves within 200 steps") {
  Model m(small(EncoderVariant::rgcn));
  TrainConfig tc;
  tc.batch_size = 10;
  tc.epochs = 200;
  tc.max_steps = 200;
  tc.lr = 3e-3f;
  tc.val_limit = 0;
  auto r = train(m, data().train, {}, tc);
  REQUIRE(r.steps == 200);
  CHECK(r.best_val_tf == -1.0);
  CHECK(r.losses.back() < 0.5f * r.losses.front());
}

TEST_CASE("training is deterministic and logs JSON lines") {
  auto run = [] {
    Model m(small(EncoderVariant::gcn));
    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 2;
    tc.seed = 9;
    std::ostringstream log;
    auto r = train(m, data().train, data().valid, tc, &log);
    return std::make_pair(r.losses, log.str());
  };
  auto [a_losses, a_log] = run();
  auto [b_losses, b_log] = run();
  CHECK(a_losses == b_losses);
  CHECK(a_log == b_log);
  CHECK(a_losses.size() == 6);
  std::istringstream lines(a_log);
  std::string line;
  int with_val = 0, total = 0;
  while (std::getline(lines, line)) {
    ++total;
    CHECK(line.rfind("{\"step\":", 0) == 0);
    with_val += line.find("\"val_tf_f1\"") != std::string::npos;
  }
  CHECK(total == 8);
  CHECK(with_val == 2);
}

TEST_CASE("best validation parameters are restored") {
  Model m(small(EncoderVariant::none));
  TrainConfig tc;
  tc.batch_size = 5;
  tc.epochs = 3;
  tc.eval_every = 1;
  auto r = train(m, data().train, data().valid, tc);
  CHECK(r.best_val_tf >= 0.0);
  CHECK(r.best_step >= 1);
  CHECK(evaluate_tf(data().valid, model_generator(m)).f1 == r.best_val_tf);
}

TEST_CASE("targets over the decode budget are skipped") {
  auto c = small(EncoderVariant::none);
  c.max_decode_len = 12;
  Model m(c);
  TrainConfig tc;
  tc.epochs = 1;
  auto r = train(m, data().train, {}, tc);
  std::size_t expected = 0;
  for (const auto& t : data().train) expected += render_sequence(t.gold_ops()).size() > 12;
  CHECK(r.skipped == expected);
}

TEST_CASE("a non-finite loss aborts training") {
  Model m(small(EncoderVariant::none));
  m.params().get("pointer.vocab.weight").data()[0] = std::numeric_limits<float>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train(m, data().train, {}, tc), NonFiniteLoss);
}

TEST_CASE("checkpoint round trip is bit exact") {
  for (auto v : {EncoderVariant::none, EncoderVariant::rgcn_rel}) {
    Model m(small(v));
    TrainConfig tc;
    tc.batch_size = 5;
    tc.epochs = 1;
    auto r = train(m, data().train, {}, tc);
    const auto path = temp_file("roundtrip.ckpt");
    save_checkpoint(path, m, &r.optimizer, r.steps);

    auto loaded = load_checkpoint(path);
    const auto& a = m.params().all();
    const auto& b = loaded.model->params().all();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].first == b[i].first);
      CHECK(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()));
    }
    CHECK(loaded.step == r.steps);
    REQUIRE(loaded.optimizer);
    CHECK(loaded.optimizer->step_count == r.optimizer.step_count);
    CHECK(loaded.optimizer->first == r.optimizer.first);
    CHECK(loaded.optimizer->second == r.optimizer.second);
    CHECK(loaded.optimizer->config.lr == r.optimizer.config.lr);
    CHECK(loaded.model->config().vocab == m.config().vocab);
    CHECK(loaded.model->config().variant == v);
    CHECK(loaded.model->config().graph_skip == m.config().graph_skip);
    for (const auto& t : data().valid) {
      ModelInput in{&t.g_seen_prev, t.action, t.observation};
      CHECK(texts(loaded.model->generate_tokens(in)) == texts(m.generate_tokens(in)));
    }

    // saving the loaded model reproduces the file byte for byte
    const auto again = temp_file("roundtrip2.ckpt");
    save_checkpoint(again, *loaded.model, &*loaded.optimizer, loaded.step);
    std::ifstream f1(path, std::ios::binary), f2(again, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    fs::remove(path);
    fs::remove(again);
  }
}

TEST_CASE("restored optimizer continues identically") {
  auto continue_from = [](Model& m, ad::Adam& adam) {
    std::vector<float> losses;
    for (int step = 0; step < 3; ++step) {
      adam.zero_grad();
      ad::Tape tape;
      auto loss = m.loss(tape, data().train[static_cast<std::size_t>(step)]);
      losses.push_back(loss.item());
      tape.backward(loss);
      adam.step();
    }
    return losses;
  };
  Model m(small(EncoderVariant::rgcn));
  ad::Adam adam(m.params().tensors());
  continue_from(m, adam);
  const auto path = temp_file("resume.ckpt");
  auto state = capture_optimizer(adam);
  save_checkpoint(path, m, &state, 3);
  auto loaded = load_checkpoint(path);
  ad::Adam resumed(loaded.model->params().tensors());
  restore_optimizer(resumed, *loaded.optimizer);
  CHECK(continue_from(m, adam) == continue_from(*loaded.model, resumed));
  fs::remove(path);
}

TEST_CASE("checkpoint contents per variant") {
  const auto path = temp_file("variant.ckpt");
  save_checkpoint(path, Model(small(EncoderVariant::none)));
  bool graph = false;
  for (const auto& [name, shape] : checkpoint_tensors(path)) graph |= name.rfind("graph_encoder.", 0) == 0;
  CHECK_FALSE(graph);
  CHECK_FALSE(load_checkpoint(path).optimizer);

  save_checkpoint(path, Model(small(EncoderVariant::rgcn_rel)));
  std::size_t relation = 0;
  for (const auto& [name, shape] : checkpoint_tensors(path)) {
    if (name.find(".relation") != std::string::npos) {
      ++relation;
      CHECK(shape == ad::Shape{32, 16});
    }
  }
  CHECK(relation == 20);
  fs::remove(path);
}

TEST_CASE("broken checkpoints are rejected") {
  CHECK_THROWS_AS(load_checkpoint(temp_file("does_not_exist.ckpt")), CheckpointError);
  const auto path = temp_file("broken.ckpt");
  {
    std::ofstream os(path, std::ios::binary);
    os << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

  save_checkpoint(path, Model(small(EncoderVariant::gcn)));
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 7);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  fs::remove(path);
}
