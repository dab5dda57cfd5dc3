#pragma once

// Tape-based reverse-mode autodiff over Tensor. A Tape owns the nodes of one
// forward pass; Var is an index into it. With grads disabled the same ops run
// eagerly without recording, so training and inference share one math path.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ckgen/tensor.hpp"

namespace ckgen {

struct Var {
  std::size_t id = SIZE_MAX;
  bool valid() const { return id != SIZE_MAX; }
};

// Additive attention masks use this value for disallowed positions; rows with
// every entry at or below kMaskedThreshold softmax to an all-zero row.
inline constexpr double kMaskValue = -1e9;
inline constexpr double kMaskedThreshold = -1e8;

class Tape {
 public:
  explicit Tape(bool grads_enabled = true) : grads_(grads_enabled) {}

  bool grads_enabled() const { return grads_; }

  // Leaves. `leaf` participates in backward; `constant` does not.
  Var leaf(Tensor value);
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const;

  // C = A * B
  Var matmul(Var a, Var b);
  // C = A * B^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  // X + row vector broadcast over rows
  Var add_rowvec(Var x, Var bias);
  Var hadamard(Var a, Var b);
  Var scale(Var x, double s);
  Var tanh_op(Var x);
  Var sigmoid(Var x);
  Var relu(Var x);
  // Row softmax of (x + mask); fully-masked rows become zero rows.
  Var softmax_rows_masked(Var x, const Tensor& mask);
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);
  Var gather_rows(Var table, std::vector<std::size_t> indices);
  Var slice_cols(Var x, std::size_t c0, std::size_t c1);
  Var concat_cols(const std::vector<Var>& xs);
  Var concat_rows(const std::vector<Var>& xs);
  // out = x with delta rows added at the given row indices
  Var scatter_add_rows(Var x, std::vector<std::size_t> indices, Var delta);
  // Mean cross-entropy of logits rows `rows` against `targets` (one target id
  // per selected row). No rows -> constant 0.
  Var mean_cross_entropy(Var logits, std::vector<std::size_t> rows, std::vector<int> targets);
  // 1x1 sum of all entries.
  Var sum_all(Var x);

  // Seeds d(loss)/d(loss)=1 and propagates to all leaves. `loss` must be 1x1.
  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> backprop;  // pulls this node's grad into parents
  };

  Var push(Tensor value, bool needs_grad, std::function<void()> backprop);
  Tensor& grad_ref(std::size_t id);

  std::vector<Node> nodes_;
  bool grads_ = true;
};

}  // namespace ckgen
