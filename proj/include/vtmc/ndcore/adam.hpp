// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "vtmc/ndcore/tape.hpp"

namespace vtmc {

struct AdamConfig {
  Scalar lr = 5e-4;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

/// First/second moment estimates for a fixed parameter list.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParamList& params, AdamConfig config);

  AdamConfig& config() { return config_; }
  const AdamConfig& config() const { return config_; }
  long step_count() const { return step_; }
  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }

  /// One bias-corrected Adam update. `grads[i]` belongs to `params[i]`.
  /// Throws TrainingError naming the parameter if any gradient is non-finite;
  /// in that case no parameter is modified.
  void step(const ParamList& params, const std::vector<Matrix>& grads);

 private:
  AdamConfig config_;
  long step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace vtmc
