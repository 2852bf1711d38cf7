// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/ndcore/tape.hpp"

#include <cmath>
#include <limits>

namespace vtmc {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Pairwise sum of row-blocks [lo, hi) of x, each `t` rows tall.
Matrix pairwise_block_sum(const Matrix& x, Index t, Index lo, Index hi) {
  if (hi - lo == 1) return x.middleRows(lo * t, t);
  const Index mid = lo + (hi - lo) / 2;
  return pairwise_block_sum(x, t, lo, mid) + pairwise_block_sum(x, t, mid, hi);
}

}  // namespace

Tape::Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, const Matrix&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && requires_grad;
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::check(Var v) const {
  if (!valid(v) || v.id >= nodes_.size()) throw StateError("tape: variable not recorded on this tape");
}

const Matrix& Tape::value(Var v) const {
  check(v);
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.value;
}

Matrix Tape::grad(Var v) const {
  check(v);
  if (!backward_done_) throw StateError("tape: grad requested before backward");
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

Matrix Tape::param_grad(const Parameter& p) const {
  if (!backward_done_) throw StateError("tape: grad requested before backward");
  auto it = param_nodes_.find(&p);
  if (it == param_nodes_.end() || nodes_[it->second].grad.size() == 0) {
    return Matrix::Zero(p.value.rows(), p.value.cols());
  }
  return nodes_[it->second].grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::accumulate_block(Var v, Index row0, Index col0, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    const Matrix& val = value(v);
    n.grad = Matrix::Zero(val.rows(), val.cols());
  }
  n.grad.block(row0, col0, g.rows(), g.cols()) += g;
}

Tape::Var Tape::input(Matrix value, bool requires_grad) {
  if (!value.allFinite()) throw DimensionError("tape input contains non-finite values");
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::param(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::linear(Var x, Var weight, Var bias) {
  check(x);
  check(weight);
  const Matrix& xv = value(x);
  const Matrix& w = value(weight);
  if (xv.cols() != w.cols()) {
    throw DimensionError("linear: input " + shape_str(xv) + " vs weight " + shape_str(w));
  }
  Matrix y = xv * w.transpose();
  const bool has_bias = valid(bias);
  if (has_bias) {
    check(bias);
    const Matrix& b = value(bias);
    if (b.rows() != 1 || b.cols() != w.rows()) throw DimensionError("linear: bias " + shape_str(b));
    y.rowwise() += b.row(0);
  }
  const bool rg = needs(x) || needs(weight) || (has_bias && needs(bias));
  return push(std::move(y), rg, [x, weight, bias, has_bias](Tape& t, const Matrix& g) {
    if (t.needs(x)) t.accumulate(x, g * t.value(weight));
    if (t.needs(weight)) t.accumulate(weight, g.transpose() * t.value(x));
    if (has_bias && t.needs(bias)) t.accumulate(bias, g.colwise().sum());
  });
}

Tape::Var Tape::linear_cols(Var x, Var weight, Index col0, Index width) {
  check(x);
  check(weight);
  const Matrix& xv = value(x);
  const Matrix& w = value(weight);
  if (xv.cols() != width || col0 < 0 || col0 + width > w.cols()) {
    throw DimensionError("linear_cols: input " + shape_str(xv) + " vs weight " + shape_str(w) +
                         " slice at " + std::to_string(col0));
  }
  Matrix y = xv * w.middleCols(col0, width).transpose();
  const bool rg = needs(x) || needs(weight);
  return push(std::move(y), rg, [x, weight, col0, width](Tape& t, const Matrix& g) {
    if (t.needs(x)) t.accumulate(x, g * t.value(weight).middleCols(col0, width));
    if (t.needs(weight)) {
      Matrix gw = g.transpose() * t.value(x);
      t.accumulate_block(weight, 0, col0, gw);
    }
  });
}

Tape::Var Tape::add_bias(Var x, Var bias) {
  check(x);
  check(bias);
  const Matrix& b = value(bias);
  if (b.rows() != 1 || b.cols() != value(x).cols()) throw DimensionError("add_bias: bias " + shape_str(b));
  Matrix y = value(x);
  y.rowwise() += b.row(0);
  return push(std::move(y), needs(x) || needs(bias), [x, bias](Tape& t, const Matrix& g) {
    t.accumulate(x, g);
    if (t.needs(bias)) t.accumulate(bias, g.colwise().sum());
  });
}

Tape::Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  if (value(a).cols() != value(b).rows()) {
    throw DimensionError("matmul: " + shape_str(value(a)) + " * " + shape_str(value(b)));
  }
  Matrix y = value(a) * value(b);
  return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
  check(a);
  check(b);
  if (value(a).cols() != value(b).cols()) {
    throw DimensionError("matmul_nt: " + shape_str(value(a)) + " * " + shape_str(value(b)) + "^T");
  }
  Matrix y = value(a) * value(b).transpose();
  return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b));
    if (t.needs(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

Tape::Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw DimensionError("add: " + shape_str(value(a)) + " + " + shape_str(value(b)));
  }
  Matrix y = value(a) + value(b);
  return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Tape::Var Tape::scale(Var x, Scalar c) {
  check(x);
  Matrix y = value(x) * c;
  return push(std::move(y), needs(x), [x, c](Tape& t, const Matrix& g) { t.accumulate(x, g * c); });
}

Tape::Var Tape::add_tiled(Var a, Var b) {
  check(a);
  check(b);
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (bv.rows() == 0 || av.cols() != bv.cols() || av.rows() % bv.rows() != 0) {
    throw DimensionError("add_tiled: " + shape_str(av) + " vs " + shape_str(bv));
  }
  const Index t_rows = bv.rows();
  const Index n = av.rows() / t_rows;
  Matrix y = av;
  for (Index i = 0; i < n; ++i) y.middleRows(i * t_rows, t_rows) += bv;
  return push(std::move(y), needs(a) || needs(b), [a, b, n, t_rows](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs(b)) t.accumulate(b, pairwise_block_sum(g, t_rows, 0, n));
  });
}

Tape::Var Tape::mean_blocks(Var x, Index n) {
  check(x);
  const Matrix& xv = value(x);
  if (n < 1) throw EmptyInputError("mean_blocks: no channels");
  if (xv.rows() % n != 0) throw DimensionError("mean_blocks: " + shape_str(xv) + " not divisible into blocks");
  const Index t_rows = xv.rows() / n;
  Matrix y = pairwise_block_sum(xv, t_rows, 0, n) / static_cast<Scalar>(n);
  return push(std::move(y), needs(x), [x, n, t_rows](Tape& t, const Matrix& g) {
    Matrix gx(g.rows() * n, g.cols());
    const Matrix share = g / static_cast<Scalar>(n);
    for (Index i = 0; i < n; ++i) gx.middleRows(i * t_rows, t_rows) = share;
    t.accumulate(x, gx);
  });
}

Tape::Var Tape::vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw EmptyInputError("vstack: no parts");
  Index rows = 0;
  const Index cols = value(parts.front()).cols();
  bool rg = false;
  for (Var p : parts) {
    check(p);
    if (value(p).cols() != cols) throw DimensionError("vstack: column mismatch");
    rows += value(p).rows();
    rg = rg || needs(p);
  }
  Matrix y(rows, cols);
  Index r = 0;
  for (Var p : parts) {
    y.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  return push(std::move(y), rg, [parts](Tape& t, const Matrix& g) {
    Index r0 = 0;
    for (Var p : parts) {
      const Index pr = t.value(p).rows();
      if (t.needs(p)) t.accumulate(p, g.middleRows(r0, pr));
      r0 += pr;
    }
  });
}

Tape::Var Tape::hstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw EmptyInputError("hstack: no parts");
  const Index rows = value(parts.front()).rows();
  Index cols = 0;
  bool rg = false;
  for (Var p : parts) {
    check(p);
    if (value(p).rows() != rows) throw DimensionError("hstack: row mismatch");
    cols += value(p).cols();
    rg = rg || needs(p);
  }
  Matrix y(rows, cols);
  Index c = 0;
  for (Var p : parts) {
    y.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
  }
  return push(std::move(y), rg, [parts](Tape& t, const Matrix& g) {
    Index c0 = 0;
    for (Var p : parts) {
      const Index pc = t.value(p).cols();
      if (t.needs(p)) t.accumulate(p, g.middleCols(c0, pc));
      c0 += pc;
    }
  });
}

Tape::Var Tape::slice_rows(Var x, Index row0, Index rows) {
  check(x);
  const Matrix& xv = value(x);
  if (row0 < 0 || rows < 0 || row0 + rows > xv.rows()) throw DimensionError("slice_rows out of range");
  Matrix y = xv.middleRows(row0, rows);
  return push(std::move(y), needs(x), [x, row0](Tape& t, const Matrix& g) {
    t.accumulate_block(x, row0, 0, g);
  });
}

Tape::Var Tape::slice_cols(Var x, Index col0, Index cols) {
  check(x);
  const Matrix& xv = value(x);
  if (col0 < 0 || cols < 0 || col0 + cols > xv.cols()) throw DimensionError("slice_cols out of range");
  Matrix y = xv.middleCols(col0, cols);
  return push(std::move(y), needs(x), [x, col0](Tape& t, const Matrix& g) {
    t.accumulate_block(x, 0, col0, g);
  });
}

Tape::Var Tape::prelu(Var x, Var slope) {
  check(x);
  check(slope);
  const Matrix& xv = value(x);
  const Matrix& s = value(slope);
  if (s.rows() != 1 || s.cols() != xv.cols()) {
    throw DimensionError("prelu: slope " + shape_str(s) + " vs input " + shape_str(xv));
  }
  Matrix y(xv.rows(), xv.cols());
  for (Index r = 0; r < xv.rows(); ++r) {
    for (Index c = 0; c < xv.cols(); ++c) {
      const Scalar v = xv(r, c);
      y(r, c) = v >= 0 ? v : s(0, c) * v;
    }
  }
  return push(std::move(y), needs(x) || needs(slope), [x, slope](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value(x);
    const Matrix& s = t.value(slope);
    if (t.needs(x)) {
      Matrix gx(g.rows(), g.cols());
      for (Index r = 0; r < g.rows(); ++r) {
        for (Index c = 0; c < g.cols(); ++c) gx(r, c) = xv(r, c) >= 0 ? g(r, c) : s(0, c) * g(r, c);
      }
      t.accumulate(x, gx);
    }
    if (t.needs(slope)) {
      Matrix gs = Matrix::Zero(1, g.cols());
      for (Index r = 0; r < g.rows(); ++r) {
        for (Index c = 0; c < g.cols(); ++c) {
          if (xv(r, c) < 0) gs(0, c) += g(r, c) * xv(r, c);
        }
      }
      t.accumulate(slope, gs);
    }
  });
}

Tape::Var Tape::relu(Var x) {
  check(x);
  Matrix y = value(x).cwiseMax(0.0);
  return push(std::move(y), needs(x), [x](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value(x);
    t.accumulate(x, (xv.array() > 0).select(g, 0.0));
  });
}

Tape::Var Tape::softmax_rows(Var x) {
  check(x);
  const Matrix& xv = value(x);
  Matrix y(xv.rows(), xv.cols());
  for (Index r = 0; r < xv.rows(); ++r) {
    const Scalar mx = xv.row(r).maxCoeff();
    y.row(r) = (xv.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  const std::size_t self = nodes_.size();
  return push(std::move(y), needs(x), [x, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.nodes_[self].value;
    Matrix gx = y.cwiseProduct(g);
    const Eigen::VectorXd dots = gx.rowwise().sum();
    gx.array() -= y.array().colwise() * dots.array();
    t.accumulate(x, gx);
  });
}

Tape::Var Tape::layer_norm(Var x, Var gamma, Var beta, Scalar eps) {
  check(x);
  check(gamma);
  check(beta);
  const Matrix& xv = value(x);
  const Matrix& ga = value(gamma);
  const Matrix& be = value(beta);
  const Index d = xv.cols();
  if (ga.rows() != 1 || ga.cols() != d || be.rows() != 1 || be.cols() != d) {
    throw DimensionError("layer_norm: affine parameters do not match width " + std::to_string(d));
  }
  Matrix xhat(xv.rows(), d);
  Eigen::VectorXd inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const Scalar mu = xv.row(r).mean();
    const Scalar var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix y = xhat.array().rowwise() * ga.row(0).array();
  y.rowwise() += be.row(0);
  const bool rg = needs(x) || needs(gamma) || needs(beta);
  return push(std::move(y), rg, [x, gamma, beta, xhat, inv_std](Tape& t, const Matrix& g) {
    if (t.needs(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
    if (t.needs(beta)) t.accumulate(beta, g.colwise().sum());
    if (t.needs(x)) {
      const Matrix& ga = t.value(gamma);
      Matrix gxhat = g.array().rowwise() * ga.row(0).array();
      const Index d = g.cols();
      Matrix gx(g.rows(), d);
      for (Index r = 0; r < g.rows(); ++r) {
        const Scalar m1 = gxhat.row(r).mean();
        const Scalar m2 = gxhat.row(r).dot(xhat.row(r)) / static_cast<Scalar>(d);
        gx.row(r) = inv_std(r) * (gxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
      t.accumulate(x, gx);
    }
  });
}

Tape::Var Tape::mask(Var x, const Matrix& m) {
  check(x);
  if (m.rows() != value(x).rows() || m.cols() != value(x).cols()) throw DimensionError("mask: shape mismatch");
  Matrix y = value(x).cwiseProduct(m);
  return push(std::move(y), needs(x), [x, m](Tape& t, const Matrix& g) { t.accumulate(x, g.cwiseProduct(m)); });
}

Tape::Var Tape::sum(Var x) {
  check(x);
  Matrix y(1, 1);
  y(0, 0) = value(x).sum();
  return push(std::move(y), needs(x), [x](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value(x);
    t.accumulate(x, Matrix::Constant(xv.rows(), xv.cols(), g(0, 0)));
  });
}

Tape::Var Tape::dot_const(Var x, const Matrix& w) {
  check(x);
  if (w.rows() != value(x).rows() || w.cols() != value(x).cols()) throw DimensionError("dot_const: shape mismatch");
  Matrix y(1, 1);
  y(0, 0) = value(x).cwiseProduct(w).sum();
  return push(std::move(y), needs(x), [x, w](Tape& t, const Matrix& g) { t.accumulate(x, w * g(0, 0)); });
}

Tape::Var Tape::softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  check(logits);
  const Matrix& z = value(logits);
  if (static_cast<Index>(labels.size()) != z.rows()) throw DimensionError("softmax_cross_entropy: label count");
  if (z.rows() == 0) throw EmptyInputError("softmax_cross_entropy: no frames");
  Matrix dz(z.rows(), z.cols());
  Scalar loss = 0;
  for (Index r = 0; r < z.rows(); ++r) {
    const int lab = labels[static_cast<std::size_t>(r)];
    if (lab < 0 || lab >= z.cols()) throw LabelError("softmax_cross_entropy: label out of range");
    const Scalar mx = z.row(r).maxCoeff();
    dz.row(r) = (z.row(r).array() - mx).exp();
    const Scalar total = dz.row(r).sum();
    loss -= (z(r, lab) - mx) - std::log(total);
    dz.row(r) /= total;
    dz(r, lab) -= 1.0;
  }
  const Scalar n = static_cast<Scalar>(z.rows());
  return custom_loss(logits, loss / n, dz / n);
}

Tape::Var Tape::custom_loss(Var x, Scalar loss, Matrix dx) {
  check(x);
  if (dx.rows() != value(x).rows() || dx.cols() != value(x).cols()) throw DimensionError("custom_loss: gradient shape");
  Matrix y(1, 1);
  y(0, 0) = loss;
  return push(std::move(y), needs(x), [x, dx = std::move(dx)](Tape& t, const Matrix& g) {
    t.accumulate(x, dx * g(0, 0));
  });
}

void Tape::backward(Var out) {
  check(out);
  const Matrix& v = value(out);
  backward(out, Matrix::Ones(v.rows(), v.cols()));
}

void Tape::backward(Var out, const Matrix& seed) {
  if (!grad_enabled_) throw StateError("tape: backward on a tape recorded without gradients");
  if (nodes_.empty()) throw StateError("tape: backward before any forward op was recorded");
  check(out);
  if (backward_done_) throw StateError("tape: backward already ran on this tape");
  const Matrix& v = value(out);
  if (seed.rows() != v.rows() || seed.cols() != v.cols()) {
    throw DimensionError("backward: seed " + shape_str(seed) + " vs output " + shape_str(v));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  accumulate(out, seed);
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.back || n.grad.size() == 0) continue;
    // Closures only write gradients of earlier nodes, so n.grad stays put.
    n.back(*this, n.grad);
  }
  backward_done_ = true;
}

}  // namespace vtmc
