// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "vtmc/ndcore/tape.hpp"

namespace vtmc {

/// y = x W^T + b with W stored out x in and b as a 1 x out row.
struct LinearLayer {
  Parameter weight;
  Parameter bias;

  LinearLayer() = default;
  LinearLayer(const std::string& prefix, Index in_dim, Index out_dim);

  Index in_dim() const { return weight.value.cols(); }
  Index out_dim() const { return weight.value.rows(); }

  /// Uniform(+-sqrt(6/(in+out))) weights, zero bias.
  void init(Rng& rng);
  void collect(ParamList& out) { out.push_back(&weight); out.push_back(&bias); }

  Tape::Var forward(Tape& tape, Tape::Var x) const {
    return tape.linear(x, tape.param(weight), tape.param(bias));
  }
};

/// Parametric ReLU with one slope per unit.
struct PReLU {
  Parameter slope;

  PReLU() = default;
  PReLU(const std::string& name, Index units, Scalar init_slope = 0.25);

  void collect(ParamList& out) { out.push_back(&slope); }
  Tape::Var forward(Tape& tape, Tape::Var x) const { return tape.prelu(x, tape.param(slope)); }
};

struct LayerNorm {
  Parameter gamma;
  Parameter beta;

  LayerNorm() = default;
  LayerNorm(const std::string& prefix, Index dim);

  void collect(ParamList& out) { out.push_back(&gamma); out.push_back(&beta); }
  Tape::Var forward(Tape& tape, Tape::Var x) const {
    return tape.layer_norm(x, tape.param(gamma), tape.param(beta));
  }
};

/// A linear map followed by PReLU, the unit the TAC equations call P, Q, R and S.
struct LinearPrelu {
  LinearLayer linear;
  PReLU act;

  LinearPrelu() = default;
  LinearPrelu(const std::string& prefix, Index in_dim, Index out_dim)
      : linear(prefix, in_dim, out_dim), act(prefix + ".slope", out_dim) {}

  void init(Rng& rng) { linear.init(rng); }
  void collect(ParamList& out) {
    linear.collect(out);
    act.collect(out);
  }
  Tape::Var forward(Tape& tape, Tape::Var x) const { return act.forward(tape, linear.forward(tape, x)); }
};

Matrix linear_forward(const LinearLayer& layer, const Matrix& x);
Matrix prelu_forward(const PReLU& act, const Matrix& x);

/// Total scalar count over a parameter list.
Index count_scalars(const ParamList& params);

}  // namespace vtmc
