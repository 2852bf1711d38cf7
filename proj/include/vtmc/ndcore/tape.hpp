// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vtmc/ndcore/matrix.hpp"

namespace vtmc {

/// A named learnable tensor. Gradients are not stored here: they live on the
/// Tape that recorded a forward pass, so a model can be shared read-only.
struct Parameter {
  std::string name;
  Matrix value;

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols) : name(std::move(n)), value(Matrix::Zero(rows, cols)) {}
};

using ParamList = std::vector<Parameter*>;

/// Reverse-mode recorder. Every op computes its value eagerly and, when the
/// tape is grad-enabled, pushes a closure that propagates the node's gradient
/// to its inputs. backward() replays the closures in reverse insertion order,
/// which is a valid topological order because inputs always precede outputs.
class Tape {
 public:
  struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
  };

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Leaves.
  Var input(Matrix value, bool requires_grad = false);
  /// Leaf bound to a parameter; the same parameter always maps to one leaf.
  Var param(const Parameter& p);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() target w.r.t. `v` (zeros if unreached).
  Matrix grad(Var v) const;
  /// Gradient w.r.t. a parameter used on this tape (zeros if unused).
  Matrix param_grad(const Parameter& p) const;

  // Dense algebra.
  /// y = x W^T + b (b optional: pass an invalid Var to skip).
  Var linear(Var x, Var weight, Var bias);
  /// y = x W[:, col0 : col0+width]^T, the contribution of one input slice.
  Var linear_cols(Var x, Var weight, Index col0, Index width);
  Var add_bias(Var x, Var bias);
  Var matmul(Var a, Var b);
  /// a b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var scale(Var x, Scalar c);
  /// a is (n*T) x D; b is T x D and is added to every block of T rows.
  Var add_tiled(Var a, Var b);
  /// Mean of the n row-blocks of x using a fixed pairwise reduction tree.
  Var mean_blocks(Var x, Index n);
  Var vstack(const std::vector<Var>& parts);
  Var hstack(const std::vector<Var>& parts);
  Var slice_rows(Var x, Index row0, Index rows);
  Var slice_cols(Var x, Index col0, Index cols);

  // Nonlinearities and normalization.
  Var prelu(Var x, Var slope);
  Var relu(Var x);
  Var softmax_rows(Var x);
  Var layer_norm(Var x, Var gamma, Var beta, Scalar eps = 1e-5);
  /// Elementwise product with a constant mask (dropout with pre-scaled mask).
  Var mask(Var x, const Matrix& m);

  // Reductions and losses (1x1 outputs).
  Var sum(Var x);
  /// Weighted sum <x, w> with a constant weight matrix.
  Var dot_const(Var x, const Matrix& w);
  /// Mean frame cross-entropy of row-softmax(logits) against class labels.
  Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);
  /// Generic scalar-loss node: `value` is the loss, `dlogits` its gradient w.r.t. x.
  Var custom_loss(Var x, Scalar value, Matrix dlogits);

  void backward(Var out);
  void backward(Var out, const Matrix& seed);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    const Parameter* param = nullptr;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Matrix&)> back;
  };

  Var push(Matrix value, bool requires_grad, std::function<void(Tape&, const Matrix&)> back);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  void accumulate(Var v, const Matrix& g);
  void accumulate_block(Var v, Index row0, Index col0, const Matrix& g);
  void check(Var v) const;
  static bool valid(Var v) { return v.id != static_cast<std::size_t>(-1); }

  bool grad_enabled_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

}  // namespace vtmc
