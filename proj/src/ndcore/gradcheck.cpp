// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/ndcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vtmc {

bool GradcheckReport::pass() const {
  return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

Scalar GradcheckReport::worst() const {
  Scalar w = 0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

namespace {

Scalar eval_loss(const LossBuilder& build) {
  Tape tape(false);
  const Tape::Var out = build(tape);
  const Matrix& v = tape.value(out);
  if (v.size() != 1) throw DimensionError("gradcheck: loss must be 1x1");
  return v(0, 0);
}

}  // namespace

GradcheckReport gradcheck(const LossBuilder& build, const ParamList& params, const GradcheckOptions& opts) {
  std::vector<Matrix> analytic;
  {
    Tape tape(true);
    const Tape::Var out = build(tape);
    tape.backward(out);
    for (const Parameter* p : params) analytic.push_back(tape.param_grad(*p) * opts.corrupt_scale);
  }

  GradcheckReport report;
  report.tolerance = opts.tolerance;
  Rng rng(opts.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    std::vector<Index> idx(static_cast<std::size_t>(p.value.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    if (opts.max_entries_per_param > 0 && static_cast<Index>(idx.size()) > opts.max_entries_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(opts.max_entries_per_param));
    }
    Scalar max_diff = 0;
    Scalar scale = 0;
    for (Index i : idx) {
      Scalar& w = p.value.data()[i];
      const Scalar orig = w;
      w = orig + opts.step;
      const Scalar up = eval_loss(build);
      w = orig - opts.step;
      const Scalar down = eval_loss(build);
      w = orig;
      const Scalar numeric = (up - down) / (2 * opts.step);
      const Scalar a = analytic[pi].data()[i];
      max_diff = std::max(max_diff, std::abs(a - numeric));
      scale = std::max({scale, std::abs(a), std::abs(numeric)});
    }
    GradcheckEntry e;
    e.name = p.name;
    e.checked = static_cast<Index>(idx.size());
    e.zero = scale <= opts.zero_threshold;
    e.max_rel_error = e.zero ? 0.0 : max_diff / scale;
    e.pass = e.max_rel_error <= opts.tolerance;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace vtmc
