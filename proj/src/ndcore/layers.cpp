// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/ndcore/layers.hpp"

#include <cmath>

namespace vtmc {

LinearLayer::LinearLayer(const std::string& prefix, Index in_dim, Index out_dim)
    : weight(prefix + ".weight", out_dim, in_dim), bias(prefix + ".bias", 1, out_dim) {}

void LinearLayer::init(Rng& rng) {
  const Scalar limit = std::sqrt(6.0 / static_cast<Scalar>(in_dim() + out_dim()));
  fill_uniform(weight.value, limit, rng);
  bias.value.setZero();
}

PReLU::PReLU(const std::string& name, Index units, Scalar init_slope) : slope(name, 1, units) {
  slope.value.setConstant(init_slope);
}

LayerNorm::LayerNorm(const std::string& prefix, Index dim)
    : gamma(prefix + ".gamma", 1, dim), beta(prefix + ".beta", 1, dim) {
  gamma.value.setOnes();
}

Matrix linear_forward(const LinearLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim()) {
    throw DimensionError("linear_forward: input has " + std::to_string(x.cols()) + " columns, layer expects " +
                         std::to_string(layer.in_dim()));
  }
  Matrix y = x * layer.weight.value.transpose();
  y.rowwise() += layer.bias.value.row(0);
  return y;
}

Matrix prelu_forward(const PReLU& act, const Matrix& x) {
  if (act.slope.value.cols() != x.cols()) {
    throw DimensionError("prelu_forward: " + std::to_string(act.slope.value.cols()) + " slopes for " +
                         std::to_string(x.cols()) + " columns");
  }
  Matrix y = x;
  for (Index r = 0; r < y.rows(); ++r) {
    for (Index c = 0; c < y.cols(); ++c) {
      if (y(r, c) < 0) y(r, c) *= act.slope.value(0, c);
    }
  }
  return y;
}

Index count_scalars(const ParamList& params) {
  Index n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

}  // namespace vtmc
