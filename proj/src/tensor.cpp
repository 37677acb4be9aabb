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

#include "kgup/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace kgup::ad {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<Node>();
  std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  node->shape = std::move(shape);
  node->value.assign(n, 0.0f);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
  std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  if (n != data.size()) {
    throw ShapeMismatch("shape " + shape_string(shape) + " needs " + std::to_string(n) + " values, got " +
                        std::to_string(data.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value) { return from({}, {value}); }

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, float stddev, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  std::normal_distribution<float> dist(0.0f, stddev);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor Tensor::xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  auto t = zeros({fan_in, fan_out}, true);
  float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  std::uniform_real_distribution<float> dist(-limit, limit);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  if (s.size() <= 1) return 1;
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  if (s.empty()) return 1;
  return s.back();
}

float Tensor::item() const {
  if (size() != 1) throw ShapeMismatch("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const { return from(shape(), node_->value, requires_grad()); }

void Tape::record(std::function<void()> backward) {
  if (enabled_) entries_.push_back(std::move(backward));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw NoTape("backward already ran on this tape");
  if (!enabled_) throw NoTape("backward on an inference tape");
  if (loss.size() != 1) throw ShapeMismatch("backward needs a scalar loss, got " + shape_string(loss.shape()));
  consumed_ = true;
  if (!loss.requires_grad()) return;
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0f;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

Mask causal_mask(std::size_t n) {
  Mask m(n * n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = -std::numeric_limits<float>::infinity();
  }
  return m;
}

namespace {

using NodePtr = std::shared_ptr<Node>;

void require_matrix(const Tensor& t, const char* op) {
  if (!t.defined()) throw ShapeMismatch(std::string(op) + ": undefined tensor");
  if (t.rank() > 2) throw ShapeMismatch(std::string(op) + ": rank > 2 not supported, got " + shape_string(t.shape()));
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeMismatch(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                      shape_string(b.shape()));
}

bool wants_grad(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape.enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Tensor output(Tape& tape, std::size_t rows, std::size_t cols, std::initializer_list<const Tensor*> inputs) {
  return Tensor::zeros({rows, cols}, wants_grad(tape, inputs));
}

bool has_grad(const NodePtr& n) { return !n->grad.empty(); }

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    const float* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      float av = arow[p];
      if (av == 0.0f) continue;
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const float* brow = b + j * k;
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    const float* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      float av = arow[p];
      if (av == 0.0f) continue;
      float* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Fwd, typename Bwd>
Tensor unary(Tape& tape, const Tensor& a, const char* name, Fwd fwd, Bwd bwd) {
  require_matrix(a, name);
  auto out = output(tape, a.rows(), a.cols(), {&a});
  auto x = a.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  if (out.requires_grad()) {
    tape.record([an = a.node(), on = out.node(), bwd] {
      if (!has_grad(on) || !an->requires_grad) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < an->value.size(); ++i) an->grad[i] += on->grad[i] * bwd(an->value[i], on->value[i]);
    });
  }
  return out;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) mismatch("matmul", a, b);
  auto out = output(tape, m, n, {&a, &b});
  gemm_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (out.requires_grad()) {
    tape.record([an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
      if (!has_grad(on)) return;
      if (an->requires_grad) {
        an->ensure_grad();
        gemm_nt(on->grad.data(), bn->value.data(), an->grad.data(), m, n, k);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        gemm_tn(an->value.data(), on->grad.data(), bn->grad.data(), m, k, n);
      }
    });
  }
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) mismatch("matmul_nt", a, b);
  auto out = output(tape, m, n, {&a, &b});
  gemm_nt(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (out.requires_grad()) {
    tape.record([an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
      if (!has_grad(on)) return;
      if (an->requires_grad) {
        an->ensure_grad();
        gemm_nn(on->grad.data(), bn->value.data(), an->grad.data(), m, n, k);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        gemm_tn(on->grad.data(), an->value.data(), bn->grad.data(), m, n, k);
      }
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_matrix(a, "transpose");
  std::size_t m = a.rows(), n = a.cols();
  auto out = output(tape, n, m, {&a});
  auto x = a.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
  }
  if (out.requires_grad()) {
    tape.record([an = a.node(), on = out.node(), m, n] {
      if (!has_grad(on) || !an->requires_grad) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += on->grad[j * m + i];
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "add");
  require_matrix(b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("add", a, b);
  auto out = output(tape, a.rows(), a.cols(), {&a, &b});
  auto x = a.data(), z = b.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + z[i];
  if (out.requires_grad()) {
    tape.record([an = a.node(), bn = b.node(), on = out.node()] {
      if (!has_grad(on)) return;
      for (const auto& n : {an, bn}) {
        if (!n->requires_grad) continue;
        n->ensure_grad();
        for (std::size_t i = 0; i < n->grad.size(); ++i) n->grad[i] += on->grad[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "mul");
  require_matrix(b, "mul");
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("mul", a, b);
  auto out = output(tape, a.rows(), a.cols(), {&a, &b});
  auto x = a.data(), z = b.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  if (out.requires_grad()) {
    tape.record([an = a.node(), bn = b.node(), on = out.node()] {
      if (!has_grad(on)) return;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < bn->grad.size(); ++i) bn->grad[i] += on->grad[i] * an->value[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, float factor) {
  return unary(
      tape, a, "scale", [factor](float x) { return x * factor; }, [factor](float, float) { return factor; });
}

Tensor add_row(Tape& tape, const Tensor& a, const Tensor& row) {
  require_matrix(a, "add_row");
  require_matrix(row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) mismatch("add_row", a, row);
  std::size_t m = a.rows(), n = a.cols();
  auto out = output(tape, m, n, {&a, &row});
  auto x = a.data(), r = row.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] + r[j];
  }
  if (out.requires_grad()) {
    tape.record([an = a.node(), rn = row.node(), on = out.node(), m, n] {
      if (!has_grad(on)) return;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < m * n; ++i) an->grad[i] += on->grad[i];
      }
      if (rn->requires_grad) {
        rn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) rn->grad[j] += on->grad[i * n + j];
        }
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
  std::size_t m = parts[0].rows(), total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m) mismatch("concat_cols", parts[0], p);
    total += p.cols();
    grad = grad || p.requires_grad();
  }
  auto out = Tensor::zeros({m, total}, grad && tape.enabled());
  auto y = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto x = p.data();
    std::size_t c = p.cols();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * c), c,
                                                    y.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    offset += c;
  }
  if (out.requires_grad()) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    tape.record([nodes, on = out.node(), m, total] {
      if (!has_grad(on)) return;
      std::size_t off = 0;
      for (const auto& n : nodes) {
        std::size_t c = n->value.size() / std::max<std::size_t>(m, 1);
        if (n->requires_grad) {
          n->ensure_grad();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < c; ++j) n->grad[i * c + j] += on->grad[i * total + off + j];
          }
        }
        off += c;
      }
    });
  }
  return out;
}

Tensor concat_rows(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  std::size_t n = parts[0].cols(), total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != n) mismatch("concat_rows", parts[0], p);
    total += p.rows();
    grad = grad || p.requires_grad();
  }
  auto out = Tensor::zeros({total, n}, grad && tape.enabled());
  auto y = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), y.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
  }
  if (out.requires_grad()) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    tape.record([nodes, on = out.node()] {
      if (!has_grad(on)) return;
      std::size_t off = 0;
      for (const auto& nd : nodes) {
        if (nd->requires_grad) {
          nd->ensure_grad();
          for (std::size_t i = 0; i < nd->grad.size(); ++i) nd->grad[i] += on->grad[off + i];
        }
        off += nd->value.size();
      }
    });
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& a, std::size_t start, std::size_t count) {
  require_matrix(a, "slice_cols");
  std::size_t m = a.rows(), n = a.cols();
  if (start + count > n) {
    throw ShapeMismatch("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                        ") outside " + shape_string(a.shape()));
  }
  auto out = output(tape, m, count, {&a});
  auto x = a.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < count; ++j) y[i * count + j] = x[i * n + start + j];
  }
  if (out.requires_grad()) {
    tape.record([an = a.node(), on = out.node(), m, n, start, count] {
      if (!has_grad(on) || !an->requires_grad) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < count; ++j) an->grad[i * n + start + j] += on->grad[i * count + j];
      }
    });
  }
  return out;
}

Tensor slice_rows(Tape& tape, const Tensor& a, std::size_t start, std::size_t count) {
  require_matrix(a, "slice_rows");
  std::size_t n = a.cols();
  if (start + count > a.rows()) {
    throw ShapeMismatch("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                        ") outside " + shape_string(a.shape()));
  }
  auto out = output(tape, count, n, {&a});
  std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(start * n), count * n, out.data().begin());
  if (out.requires_grad()) {
    tape.record([an = a.node(), on = out.node(), start, n] {
      if (!has_grad(on) || !an->requires_grad) return;
      an->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[start * n + i] += on->grad[i];
    });
  }
  return out;
}

Tensor repeat_rows(Tape& tape, const Tensor& row, std::size_t count) {
  require_matrix(row, "repeat_rows");
  if (row.rows() != 1) throw ShapeMismatch("repeat_rows: expected a single row, got " + shape_string(row.shape()));
  std::size_t n = row.cols();
  auto out = output(tape, count, n, {&row});
  for (std::size_t i = 0; i < count; ++i) {
    std::copy(row.data().begin(), row.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  if (out.requires_grad()) {
    tape.record([rn = row.node(), on = out.node(), count, n] {
      if (!has_grad(on) || !rn->requires_grad) return;
      rn->ensure_grad();
      for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < n; ++j) rn->grad[j] += on->grad[i * n + j];
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  require_matrix(a, "sum");
  auto out = output(tape, 1, 1, {&a});
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  out.data()[0] = static_cast<float>(acc);
  if (out.requires_grad()) {
    tape.record([an = a.node(), on = out.node()] {
      if (!has_grad(on) || !an->requires_grad) return;
      an->ensure_grad();
      for (auto& g : an->grad) g += on->grad[0];
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
  require_matrix(a, "mean");
  if (a.size() == 0) throw ShapeMismatch("mean of an empty tensor");
  auto out = output(tape, 1, 1, {&a});
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  out.data()[0] = static_cast<float>(acc / static_cast<double>(a.size()));
  if (out.requires_grad()) {
    tape.record([an = a.node(), on = out.node()] {
      if (!has_grad(on) || !an->requires_grad) return;
      an->ensure_grad();
      float g = on->grad[0] / static_cast<float>(an->value.size());
      for (auto& v : an->grad) v += g;
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, "relu", [](float x) { return x > 0.0f ? x : 0.0f; },
      [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor gelu(Tape& tape, const Tensor& a) {
  constexpr float k = 0.7978845608028654f;  // sqrt(2/pi)
  constexpr float c = 0.044715f;
  return unary(
      tape, a, "gelu",
      [](float x) { return 0.5f * x * (1.0f + std::tanh(k * (x + c * x * x * x))); },
      [](float x, float) {
        float u = k * (x + c * x * x * x);
        float th = std::tanh(u);
        float du = k * (1.0f + 3.0f * c * x * x);
        return 0.5f * (1.0f + th) + 0.5f * x * (1.0f - th * th) * du;
      });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, "sigmoid", [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const std::int32_t> ids) {
  require_matrix(table, "embedding_lookup");
  std::size_t v = table.rows(), h = table.cols();
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw ShapeMismatch("embedding_lookup: id " + std::to_string(id) + " outside table " +
                          shape_string(table.shape()));
    }
  }
  auto out = output(tape, ids.size(), h, {&table});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto src = table.data().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * h);
    std::copy_n(src, h, out.data().begin() + static_cast<std::ptrdiff_t>(i * h));
  }
  if (out.requires_grad()) {
    tape.record([tn = table.node(), on = out.node(), idv = std::vector<std::int32_t>(ids.begin(), ids.end()), h] {
      if (!has_grad(on) || !tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        float* dst = tn->grad.data() + static_cast<std::size_t>(idv[i]) * h;
        const float* src = on->grad.data() + i * h;
        for (std::size_t j = 0; j < h; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor embedding_bag_mean(Tape& tape, const Tensor& table, const std::vector<std::vector<std::int32_t>>& groups) {
  require_matrix(table, "embedding_bag_mean");
  std::size_t v = table.rows(), h = table.cols();
  auto out = output(tape, groups.size(), h, {&table});
  auto y = out.data();
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) continue;
    float w = 1.0f / static_cast<float>(groups[k].size());
    for (auto id : groups[k]) {
      if (id < 0 || static_cast<std::size_t>(id) >= v) {
        throw ShapeMismatch("embedding_bag_mean: id " + std::to_string(id) + " outside table " +
                            shape_string(table.shape()));
      }
      const float* src = table.data().data() + static_cast<std::size_t>(id) * h;
      for (std::size_t j = 0; j < h; ++j) y[k * h + j] += w * src[j];
    }
  }
  if (out.requires_grad()) {
    tape.record([tn = table.node(), on = out.node(), groups, h] {
      if (!has_grad(on) || !tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) continue;
        float w = 1.0f / static_cast<float>(groups[k].size());
        for (auto id : groups[k]) {
          float* dst = tn->grad.data() + static_cast<std::size_t>(id) * h;
          for (std::size_t j = 0; j < h; ++j) dst[j] += w * on->grad[k * h + j];
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  require_matrix(x, "layer_norm");
  std::size_t m = x.rows(), n = x.cols();
  if (gamma.size() != n) mismatch("layer_norm", x, gamma);
  if (beta.size() != n) mismatch("layer_norm", x, beta);
  auto out = output(tape, m, n, {&x, &gamma, &beta});
  std::vector<float> xhat(m * n), rstd(m);
  auto xv = x.data();
  auto g = gamma.data(), b = beta.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0, var = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      double d = xv[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double r = 1.0 / std::sqrt(var + eps);
    rstd[i] = static_cast<float>(r);
    for (std::size_t j = 0; j < n; ++j) {
      float h = static_cast<float>((xv[i * n + j] - mu) * r);
      xhat[i * n + j] = h;
      y[i * n + j] = h * g[j] + b[j];
    }
  }
  if (out.requires_grad()) {
    tape.record([xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node(), xhat = std::move(xhat),
                 rstd = std::move(rstd), m, n] {
      if (!has_grad(on)) return;
      const auto& dy = on->grad;
      if (gn->requires_grad) {
        gn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) gn->grad[j] += dy[i * n + j] * xhat[i * n + j];
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) bn->grad[j] += dy[i * n + j];
        }
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            double d = static_cast<double>(dy[i * n + j]) * gn->value[j];
            mean_d += d;
            mean_dx += d * xhat[i * n + j];
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            double d = static_cast<double>(dy[i * n + j]) * gn->value[j];
            xn->grad[i * n + j] += static_cast<float>(rstd[i] * (d - mean_d - xhat[i * n + j] * mean_dx));
          }
        }
      }
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x, const Mask* mask) {
  require_matrix(x, "softmax");
  std::size_t m = x.rows(), n = x.cols();
  if (mask != nullptr && mask->size() != m * n) {
    throw ShapeMismatch("softmax: mask of " + std::to_string(mask->size()) + " entries for logits " +
                        shape_string(x.shape()));
  }
  auto out = output(tape, m, n, {&x});
  auto xv = x.data();
  auto y = out.data();
  constexpr float neg_inf = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    float mx = neg_inf;
    for (std::size_t j = 0; j < n; ++j) {
      float v = xv[i * n + j] + (mask ? (*mask)[i * n + j] : 0.0f);
      y[i * n + j] = v;
      mx = std::max(mx, v);
    }
    if (mx == neg_inf) {
      // fully masked row: leave zeros
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] = 0.0f;
      continue;
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      float e = y[i * n + j] == neg_inf ? 0.0f : std::exp(y[i * n + j] - mx);
      y[i * n + j] = e;
      z += e;
    }
    auto inv = static_cast<float>(1.0 / z);
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] *= inv;
  }
  if (out.requires_grad()) {
    tape.record([xn = x.node(), on = out.node(), m, n] {
      if (!has_grad(on) || !xn->requires_grad) return;
      xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(on->grad[i * n + j]) * on->value[i * n + j];
        for (std::size_t j = 0; j < n; ++j) {
          xn->grad[i * n + j] +=
              on->value[i * n + j] * static_cast<float>(static_cast<double>(on->grad[i * n + j]) - dot);
        }
      }
    });
  }
  return out;
}

Tensor log_floor(Tape& tape, const Tensor& x, float floor) {
  return unary(
      tape, x, "log_floor", [floor](float v) { return std::log(std::max(v, floor)); },
      [floor](float v, float) { return v > floor ? 1.0f / v : 0.0f; });
}

Tensor sparse_matmul(Tape& tape, const SparseMatrix& mtx, const Tensor& x) {
  require_matrix(x, "sparse_matmul");
  if (x.rows() != mtx.cols) {
    throw ShapeMismatch("sparse_matmul: matrix [" + std::to_string(mtx.rows) + "x" + std::to_string(mtx.cols) +
                        "] times " + shape_string(x.shape()));
  }
  std::size_t n = x.cols();
  auto out = output(tape, mtx.rows, n, {&x});
  auto xv = x.data();
  auto y = out.data();
  for (const auto& e : mtx.entries) {
    for (std::size_t j = 0; j < n; ++j) y[e.row * n + j] += e.weight * xv[e.col * n + j];
  }
  if (out.requires_grad()) {
    tape.record([xn = x.node(), on = out.node(), entries = mtx.entries, n] {
      if (!has_grad(on) || !xn->requires_grad) return;
      xn->ensure_grad();
      for (const auto& e : entries) {
        for (std::size_t j = 0; j < n; ++j) xn->grad[e.col * n + j] += e.weight * on->grad[e.row * n + j];
      }
    });
  }
  return out;
}

Tensor pointer_mix(Tape& tape, const Tensor& gate, const Tensor& vocab_probs, const Tensor& attn,
                   std::span<const std::int32_t> source_ids, std::size_t ext_size) {
  require_matrix(gate, "pointer_mix");
  require_matrix(vocab_probs, "pointer_mix");
  require_matrix(attn, "pointer_mix");
  std::size_t t = vocab_probs.rows(), v = vocab_probs.cols(), l = attn.cols();
  if (gate.rows() != t || gate.cols() != 1) mismatch("pointer_mix", gate, vocab_probs);
  if (attn.rows() != t) mismatch("pointer_mix", attn, vocab_probs);
  if (source_ids.size() != l) {
    throw ShapeMismatch("pointer_mix: " + std::to_string(source_ids.size()) + " source ids for attention " +
                        shape_string(attn.shape()));
  }
  if (ext_size < v) throw ShapeMismatch("pointer_mix: extended vocabulary smaller than vocabulary");
  for (auto id : source_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= ext_size) {
      throw ShapeMismatch("pointer_mix: source id " + std::to_string(id) + " outside extended vocabulary");
    }
  }
  auto out = output(tape, t, ext_size, {&gate, &vocab_probs, &attn});
  auto y = out.data();
  auto g = gate.data(), p = vocab_probs.data(), a = attn.data();
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t w = 0; w < v; ++w) y[r * ext_size + w] = g[r] * p[r * v + w];
    for (std::size_t i = 0; i < l; ++i) {
      y[r * ext_size + static_cast<std::size_t>(source_ids[i])] += (1.0f - g[r]) * a[r * l + i];
    }
  }
  if (out.requires_grad()) {
    tape.record([gn = gate.node(), pn = vocab_probs.node(), an = attn.node(), on = out.node(),
                 src = std::vector<std::int32_t>(source_ids.begin(), source_ids.end()), t, v, l, ext_size] {
      if (!has_grad(on)) return;
      const auto& dy = on->grad;
      if (gn->requires_grad) gn->ensure_grad();
      if (pn->requires_grad) pn->ensure_grad();
      if (an->requires_grad) an->ensure_grad();
      for (std::size_t r = 0; r < t; ++r) {
        const float* dyr = dy.data() + r * ext_size;
        float gv = gn->value[r];
        if (gn->requires_grad) {
          double acc = 0.0;
          for (std::size_t w = 0; w < v; ++w) acc += static_cast<double>(dyr[w]) * pn->value[r * v + w];
          for (std::size_t i = 0; i < l; ++i) {
            acc -= static_cast<double>(dyr[static_cast<std::size_t>(src[i])]) * an->value[r * l + i];
          }
          gn->grad[r] += static_cast<float>(acc);
        }
        if (pn->requires_grad) {
          for (std::size_t w = 0; w < v; ++w) pn->grad[r * v + w] += gv * dyr[w];
        }
        if (an->requires_grad) {
          for (std::size_t i = 0; i < l; ++i) an->grad[r * l + i] += (1.0f - gv) * dyr[static_cast<std::size_t>(src[i])];
        }
      }
    });
  }
  return out;
}

Tensor nll_loss(Tape& tape, const Tensor& log_probs, std::span<const std::int32_t> targets, std::int32_t pad_id) {
  require_matrix(log_probs, "nll_loss");
  std::size_t t = log_probs.rows(), v = log_probs.cols();
  if (targets.size() != t) {
    throw ShapeMismatch("nll_loss: " + std::to_string(targets.size()) + " targets for log-probs " +
                        shape_string(log_probs.shape()));
  }
  std::size_t count = 0;
  double acc = 0.0;
  for (std::size_t r = 0; r < t; ++r) {
    if (targets[r] == pad_id) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= v) {
      throw ShapeMismatch("nll_loss: target " + std::to_string(targets[r]) + " outside " +
                          shape_string(log_probs.shape()));
    }
    acc -= log_probs.data()[r * v + static_cast<std::size_t>(targets[r])];
    ++count;
  }
  auto out = output(tape, 1, 1, {&log_probs});
  out.data()[0] = count == 0 ? 0.0f : static_cast<float>(acc / static_cast<double>(count));
  if (out.requires_grad() && count > 0) {
    tape.record([ln = log_probs.node(), on = out.node(), tg = std::vector<std::int32_t>(targets.begin(), targets.end()),
                 pad_id, v, count] {
      if (!has_grad(on) || !ln->requires_grad) return;
      ln->ensure_grad();
      float g = on->grad[0] / static_cast<float>(count);
      for (std::size_t r = 0; r < tg.size(); ++r) {
        if (tg[r] == pad_id) continue;
        ln->grad[r * v + static_cast<std::size_t>(tg[r])] -= g;
      }
    });
  }
  return out;
}

}  // namespace kgup::ad
