// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/ndcore/adam.hpp"

#include <cmath>

namespace vtmc {

AdamState::AdamState(const ParamList& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Parameter* p : params) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamState::step(const ParamList& params, const std::vector<Matrix>& grads) {
  if (params.size() != m_.size() || grads.size() != params.size()) {
    throw DimensionError("adam: parameter/gradient count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(grads[i], m_[i].rows(), m_[i].cols(), "adam gradient for " + params[i]->name);
    if (!grads[i].allFinite()) throw TrainingError("non-finite gradient for parameter " + params[i]->name);
  }
  ++step_;
  const Scalar c1 = 1.0 - std::pow(config_.beta1, static_cast<Scalar>(step_));
  const Scalar c2 = 1.0 - std::pow(config_.beta2, static_cast<Scalar>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseProduct(grads[i]);
    auto mhat = m_[i].array() / c1;
    auto vhat = v_[i].array() / c2;
    params[i]->value.array() -= config_.lr * mhat / (vhat.sqrt() + config_.eps);
  }
}

}  // namespace vtmc
