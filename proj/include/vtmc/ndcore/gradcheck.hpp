// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vtmc/ndcore/tape.hpp"

namespace vtmc {

struct GradcheckOptions {
  Scalar step = 1e-5;
  Scalar tolerance = 1e-6;
  /// 0 checks every entry; otherwise a seeded random subset per parameter.
  Index max_entries_per_param = 0;
  std::uint64_t seed = 7;
  /// Multiplies the analytic gradient before comparison (fault injection).
  Scalar corrupt_scale = 1.0;
  /// Gradients with every entry below this (analytic and numeric) count as
  /// zero on both sides, e.g. an attention key bias under softmax shift
  /// invariance. Finite-difference noise alone is around 1e-11.
  Scalar zero_threshold = 1e-8;
};

struct GradcheckEntry {
  std::string name;
  /// max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|)
  Scalar max_rel_error = 0;
  Index checked = 0;
  bool zero = false;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  Scalar tolerance = 0;

  bool pass() const;
  Scalar worst() const;
};

/// Builds a scalar (1x1) loss on the given tape from the current parameter values.
using LossBuilder = std::function<Tape::Var(Tape&)>;

/// Compares reverse-mode gradients with central finite differences for every
/// parameter in `params`. Inputs can be checked by wrapping them as Parameters.
/// The builder must be deterministic.
GradcheckReport gradcheck(const LossBuilder& build, const ParamList& params, const GradcheckOptions& opts = {});

}  // namespace vtmc
