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
#include <limits>
#include <random>

#include "doctest.h"
#include "kgup/gradcheck.hpp"
#include "kgup/optim.hpp"
#include "kgup/tensor.hpp"

using namespace kgup::ad;

namespace {

constexpr double kTol = 1e-3;

Tensor rnd(std::size_t r, std::size_t c, std::mt19937_64& rng) { return Tensor::randn({r, c}, rng, 1.0f, true); }

// Plain-loop reference matmul in double.
std::vector<double> ref_matmul(const Tensor& a, const Tensor& b) {
  std::vector<double> out(a.rows() * b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      for (std::size_t p = 0; p < a.cols(); ++p) out[i * b.cols() + j] += double(a.at(i, p)) * b.at(p, j);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("forward examples") {
  Tape tape(false);
  auto s = softmax(tape, Tensor::from({1, 3}, {0, 0, 0}));
  for (float v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0));

  std::mt19937_64 rng(1);
  auto x = rnd(2, 3, rng);
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto y = matmul(tape, eye, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);

  auto ln = layer_norm(tape, Tensor::from({1, 3}, {1, 2, 3}), Tensor::from({3}, {1, 1, 1}), Tensor::from({3}, {0, 0, 0}));
  // (x - 2) / sqrt(2/3 + 1e-5)
  const double sd = std::sqrt(2.0 / 3.0 + 1e-5);
  CHECK(ln.data()[0] == doctest::Approx(-1.0 / sd).epsilon(1e-4));
  CHECK(ln.data()[1] == doctest::Approx(0.0));
  CHECK(ln.data()[2] == doctest::Approx(1.0 / sd).epsilon(1e-4));
  CHECK(ln.data()[2] == doctest::Approx(1.2247).epsilon(1e-3));

  auto a = rnd(3, 4, rng), b = rnd(4, 5, rng);
  auto ab = matmul(tape, a, b);
  auto ref = ref_matmul(a, b);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(ab.data()[i] == doctest::Approx(ref[i]).epsilon(1e-5));
  auto abt = matmul_nt(tape, a, transpose(tape, b));
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(abt.data()[i] == doctest::Approx(ref[i]).epsilon(1e-5));
}

TEST_CASE("shape errors name both shapes") {
  Tape tape;
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 3});
  try {
    matmul(tape, a, b);
    FAIL("expected ShapeMismatch");
  } catch (const ShapeMismatch& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(tape, a, Tensor::zeros({3, 2})), ShapeMismatch);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeMismatch);
}

TEST_CASE("nll_loss") {
  Tape tape(false);
  auto one_hot = Tensor::from({2, 3}, {0, -1e9f, -1e9f, -1e9f, 0, -1e9f});
  std::vector<std::int32_t> targets{0, 1};
  CHECK(nll_loss(tape, one_hot, targets, -1).item() == 0.0f);
  auto uniform = Tensor::from({2, 4}, std::vector<float>(8, std::log(0.25f)));
  CHECK(nll_loss(tape, uniform, targets, -1).item() == doctest::Approx(std::log(4.0)).epsilon(1e-5));
  std::vector<std::int32_t> pads{0, 0};
  CHECK(nll_loss(tape, uniform, pads, 0).item() == 0.0f);

  Tape t2;
  auto lp = Tensor::from({2, 4}, std::vector<float>(8, -1.0f), true);
  auto loss = nll_loss(t2, lp, pads, 0);
  t2.backward(loss);
  for (float g : lp.grad()) CHECK(g == 0.0f);
}

TEST_CASE("backward examples") {
  {
    Tape tape;
    auto x = Tensor::from({1, 3}, {1, -2, 5}, true);
    tape.backward(sum(tape, x));
    for (float g : x.grad()) CHECK(g == 1.0f);
    CHECK_THROWS_AS(tape.backward(sum(tape, x)), NoTape);
  }
  {
    Tape tape;
    auto x = Tensor::from({1, 2}, {1, 2}, true);
    tape.backward(sum(tape, mul(tape, x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
  }
  auto f = [](Tape& t, const Tensor& x) { return sum(t, x); };
  // a power-of-two step keeps every perturbed sum exact
  CHECK(grad_check(f, Tensor::from({1, 4}, {1, 2, 3, 4}), 1.0 / 1024) < 1e-6);
}

TEST_CASE("softmax under masks") {
  Tape tape(false);
  std::mt19937_64 rng(2);
  auto x = rnd(4, 4, rng);
  auto mask = causal_mask(4);
  auto y = softmax(tape, x, &mask);
  for (std::size_t i = 0; i < 4; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(y.at(i, j) >= 0.0f);
      if (j > i) CHECK(y.at(i, j) == 0.0f);
      row += y.at(i, j);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("gradient checks of every primitive on random shapes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto a = rnd(3, 4, rng), b = rnd(4, 2, rng), c = rnd(3, 4, rng), row = rnd(1, 4, rng), bt = rnd(2, 4, rng);
    auto gamma = rnd(1, 4, rng), beta = rnd(1, 4, rng);
    auto table = rnd(6, 3, rng);
    auto probs_logits = rnd(3, 5, rng), attn_logits = rnd(3, 4, rng), gate_logits = rnd(3, 1, rng);
    auto mask = causal_mask(3);
    Mask wide(3 * 4, 0.0f);
    wide[1] = -std::numeric_limits<float>::infinity();
    SparseMatrix sp{3, 3, {{0, 0, 0.5f}, {0, 1, 0.5f}, {1, 1, 1.0f}, {2, 0, 0.25f}, {2, 2, 0.75f}}};
    std::vector<std::int32_t> ids{1, 5, 1, 0};
    std::vector<std::vector<std::int32_t>> groups{{0, 2}, {}, {5, 5, 3}};
    std::vector<std::int32_t> src{1, 6, 1, 3};
    std::vector<std::int32_t> targets{2, 6, 0};

    const std::vector<std::pair<std::string, std::function<Tensor(Tape&)>>> cases = {
        {"matmul", [&](Tape& t) { return matmul(t, a, b); }},
        {"matmul_nt", [&](Tape& t) { return matmul_nt(t, a, bt); }},
        {"transpose", [&](Tape& t) { return transpose(t, a); }},
        {"add", [&](Tape& t) { return add(t, a, c); }},
        {"mul", [&](Tape& t) { return mul(t, a, c); }},
        {"scale", [&](Tape& t) { return scale(t, a, -1.5f); }},
        {"add_row", [&](Tape& t) { return add_row(t, a, row); }},
        {"concat_cols", [&](Tape& t) { return concat_cols(t, std::vector<Tensor>{a, c}); }},
        {"concat_rows", [&](Tape& t) { return concat_rows(t, std::vector<Tensor>{a, row, c}); }},
        {"slice_cols", [&](Tape& t) { return slice_cols(t, a, 1, 2); }},
        {"slice_rows", [&](Tape& t) { return slice_rows(t, a, 1, 2); }},
        {"repeat_rows", [&](Tape& t) { return repeat_rows(t, row, 3); }},
        {"mean", [&](Tape& t) { return mean(t, mul(t, a, c)); }},
        {"relu", [&](Tape& t) { return relu(t, a); }},
        {"gelu", [&](Tape& t) { return gelu(t, a); }},
        {"sigmoid", [&](Tape& t) { return sigmoid(t, a); }},
        {"embedding_lookup", [&](Tape& t) { return embedding_lookup(t, table, ids); }},
        {"embedding_bag_mean", [&](Tape& t) { return embedding_bag_mean(t, table, groups); }},
        {"layer_norm", [&](Tape& t) { return layer_norm(t, a, gamma, beta); }},
        {"softmax", [&](Tape& t) { return softmax(t, a); }},
        {"softmax_causal", [&](Tape& t) { return softmax(t, slice_cols(t, a, 0, 3), &mask); }},
        {"softmax_masked", [&](Tape& t) { return softmax(t, a, &wide); }},
        {"log_floor", [&](Tape& t) { return log_floor(t, softmax(t, a)); }},
        {"sparse_matmul", [&](Tape& t) { return sparse_matmul(t, sp, slice_cols(t, a, 0, 3)); }},
        {"softmax_matmul", [&](Tape& t) { return softmax(t, matmul(t, a, b)); }},
        {"pointer_mix",
         [&](Tape& t) {
           return pointer_mix(t, sigmoid(t, gate_logits), softmax(t, probs_logits), softmax(t, attn_logits), src, 7);
         }},
        {"nll_loss",
         [&](Tape& t) {
           auto mix = pointer_mix(t, sigmoid(t, gate_logits), softmax(t, probs_logits), softmax(t, attn_logits), src, 7);
           return nll_loss(t, log_floor(t, mix), targets, -1);
         }},
    };
    NamedTensors params{{"a", a}, {"b", b}, {"c", c}, {"row", row}, {"bt", bt}, {"gamma", gamma}, {"beta", beta},
                        {"table", table}, {"probs", probs_logits}, {"attn", attn_logits}, {"gate", gate_logits}};
    for (const auto& [name, f] : cases) {
      GradCheckOptions opt;
      opt.seed = seed;
      auto report = grad_check(f, params, opt);
      CHECK_MESSAGE(report.max_error < kTol, name << " seed " << seed << " error " << report.max_error << " in "
                                                  << report.worst);
    }
  }
}

TEST_CASE("adam") {
  {
    auto p = Tensor::from({1, 3}, {1, 2, 3}, true);
    Adam opt({p});
    p.grad_mut();
    opt.step();
    CHECK(p.data()[0] == 1.0f);
    CHECK(p.data()[2] == 3.0f);
  }
  {
    auto p = Tensor::from({1, 2}, {0, 0}, true);
    AdamConfig cfg;
    cfg.clip_norm = 0.0f;
    Adam opt({p}, cfg);
    auto g = p.grad_mut();
    g[0] = 0.3f;
    g[1] = -20.0f;
    opt.step();
    CHECK(p.data()[0] == doctest::Approx(-1e-3).epsilon(1e-3));
    CHECK(p.data()[1] == doctest::Approx(1e-3).epsilon(1e-3));
    for (int i = 0; i < 200; ++i) {
      float before0 = p.data()[0], before1 = p.data()[1];
      opt.step();
      CHECK(std::abs(p.data()[0] - before0) <= 1e-3f * (1.0f + 1e-4f));
      CHECK(std::abs(p.data()[1] - before1) <= 1e-3f * (1.0f + 1e-4f));
    }
  }
}

TEST_CASE("grad_check flags a wrong backward rule") {
  std::mt19937_64 rng(4);
  auto x = rnd(2, 3, rng);
  // y = 2x with a backward rule claiming dy/dx = 2.1
  auto broken = [&](Tape& t) {
    auto y = Tensor::zeros({2, 3}, t.enabled());
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = 2.0f * x.data()[i];
    if (t.enabled()) {
      t.record([xn = x.node(), yn = y.node()] {
        xn->ensure_grad();
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += 2.1f * yn->grad[i];
      });
    }
    return y;
  };
  auto report = grad_check(broken, {{"x", x}});
  CHECK(report.max_error > 0.04);
  CHECK(report.worst == "x");
}
