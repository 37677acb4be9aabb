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
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgup::ad {

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoTape : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // allocated on first use
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
  }
};

/// Shared handle to a dense row-major float32 array. Copies alias the same
/// storage; use clone() for a deep copy. Rank 0 and 1 tensors are viewed as
/// 1 x n matrices by the ops.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> data, bool requires_grad = false);
  static Tensor scalar(float value);
  static Tensor randn(Shape shape, std::mt19937_64& rng, float stddev = 1.0f, bool requires_grad = false);
  /// Glorot-uniform init for a fan_in x fan_out weight.
  static Tensor xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return node_->value.size(); }

  std::span<float> data() { return node_->value; }
  std::span<const float> data() const { return node_->value; }
  /// Empty until a backward pass touched this tensor.
  std::span<const float> grad() const { return node_->grad; }
  std::span<float> grad_mut() {
    node_->ensure_grad();
    return node_->grad;
  }
  float item() const;
  float at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad();
  Tensor clone() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Records backward closures in execution order. A disabled tape records
/// nothing, so ops run as plain forward computation.
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape inference() { return Tape(false); }

  bool enabled() const { return enabled_; }
  std::size_t size() const { return entries_.size(); }
  void record(std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1 and runs the closures in reverse. The tape is
  /// consumed; a second call throws NoTape.
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> entries_;
  bool enabled_ = true;
  bool consumed_ = false;
};

/// Fixed (non-differentiable) sparse matrix used for graph propagation.
struct SparseMatrix {
  struct Entry {
    std::size_t row;
    std::size_t col;
    float weight;
  };
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Entry> entries;
};

/// Additive attention mask (0 or -inf), row-major, one entry per score.
using Mask = std::vector<float>;

Mask causal_mask(std::size_t n);

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, float factor);
/// Adds a 1 x n row to every row of a.
Tensor add_row(Tape& tape, const Tensor& a, const Tensor& row);
Tensor concat_cols(Tape& tape, std::span<const Tensor> parts);
Tensor concat_rows(Tape& tape, std::span<const Tensor> parts);
Tensor slice_cols(Tape& tape, const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_rows(Tape& tape, const Tensor& a, std::size_t start, std::size_t count);
Tensor repeat_rows(Tape& tape, const Tensor& row, std::size_t n);
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
Tensor relu(Tape& tape, const Tensor& a);
Tensor gelu(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const std::int32_t> ids);
/// Row k is the mean of table rows listed in groups[k].
Tensor embedding_bag_mean(Tape& tape, const Tensor& table, const std::vector<std::vector<std::int32_t>>& groups);
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
/// Row-wise softmax; `mask`, when given, is added to the logits first.
/// Masked slots come out exactly zero.
Tensor softmax(Tape& tape, const Tensor& x, const Mask* mask = nullptr);
/// log(max(x, floor)).
Tensor log_floor(Tape& tape, const Tensor& x, float floor = 1e-12f);
Tensor sparse_matmul(Tape& tape, const SparseMatrix& m, const Tensor& x);

/// Pointer-softmax mixture. gate: T x 1, vocab_probs: T x V, attn: T x L,
/// source_ids: L ids into the extended vocabulary of size ext_size >= V.
/// out[t, w] = g_t * vocab_probs[t, w] + (1 - g_t) * sum_{i: src_i = w} attn[t, i].
Tensor pointer_mix(Tape& tape, const Tensor& gate, const Tensor& vocab_probs, const Tensor& attn,
                   std::span<const std::int32_t> source_ids, std::size_t ext_size);

/// Mean of -log_probs[t, targets[t]] over positions whose target != pad_id.
/// All-pad input yields 0.
Tensor nll_loss(Tape& tape, const Tensor& log_probs, std::span<const std::int32_t> targets, std::int32_t pad_id);

}  // namespace kgup::ad
