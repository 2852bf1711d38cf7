// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/trainloop/checks.hpp"

#include <cmath>

#include "vtmc/ctc/ctc.hpp"
#include "vtmc/errors.hpp"
#include "vtmc/secondpass/model.hpp"
#include "vtmc/tac/tac.hpp"

namespace vtmc {

namespace {

void perturb(const ParamList& ps, Rng& rng, Scalar scale = 0.5) {
  for (Parameter* p : ps) p->value.array() += random_normal(p->value.rows(), p->value.cols(), rng, scale).array();
}

Parameter input_param(const std::string& name, Index rows, Index cols, Rng& rng) {
  Parameter p(name, rows, cols);
  p.value = random_normal(rows, cols, rng);
  return p;
}

// keeps PReLU inputs off the kink
void away_from_zero(Matrix& m) {
  for (Index i = 0; i < m.size(); ++i) {
    if (std::abs(m.data()[i]) < 0.05) m.data()[i] = 0.3;
  }
}

}  // namespace

const std::vector<std::string>& gradcheck_modules() {
  static const std::vector<std::string> names{"linear", "prelu", "tac", "modtac", "encoder", "ctc", "model"};
  return names;
}

GradcheckReport check_module(const std::string& name, const GradcheckOptions& opts, std::uint64_t seed) {
  Rng rng(seed);
  if (name == "linear") {
    LinearLayer l("linear", 4, 3);
    l.init(rng);
    ParamList ps;
    l.collect(ps);
    perturb(ps, rng);
    Parameter x = input_param("x", 5, 4, rng);
    ps.push_back(&x);
    const Matrix w = random_normal(5, 3, rng);
    return gradcheck([&](Tape& t) { return t.dot_const(l.forward(t, t.param(x)), w); }, ps, opts);
  }
  if (name == "prelu") {
    PReLU a("prelu", 4);
    ParamList ps;
    a.collect(ps);
    perturb(ps, rng, 0.2);
    Parameter x = input_param("x", 6, 4, rng);
    away_from_zero(x.value);
    ps.push_back(&x);
    const Matrix w = random_normal(6, 4, rng);
    return gradcheck([&](Tape& t) { return t.dot_const(a.forward(t, t.param(x)), w); }, ps, opts);
  }
  if (name == "tac" || name == "modtac") {
    const Index n = 3, frames = 4, dim = 6, hidden = 5;
    Parameter z = input_param("z", n * frames, dim, rng);
    const Matrix w = random_normal(n * frames, dim, rng);
    if (name == "tac") {
      TacBlock b("tac", dim, hidden);
      ParamList ps;
      b.collect(ps);
      perturb(ps, rng);
      ps.push_back(&z);
      return gradcheck([&](Tape& t) { return t.dot_const(b.forward(t, t.param(z), n), w); }, ps, opts);
    }
    ModTacBlock b("tac", dim, hidden);
    ParamList ps;
    b.collect(ps);
    perturb(ps, rng);
    Parameter sc = input_param("sc", frames, dim, rng);
    ps.push_back(&z);
    ps.push_back(&sc);
    const Matrix wsc = random_normal(frames, dim, rng);
    return gradcheck(
        [&](Tape& t) {
          const auto o = b.forward(t, t.param(z), n, t.param(sc));
          return t.add(t.dot_const(o.channels, w), t.dot_const(o.selected, wsc));
        },
        ps, opts);
  }
  if (name == "encoder") {
    EncoderBlock blk("sp.enc.0", 8, 2, 16);
    blk.init(rng);
    ParamList ps;
    blk.collect(ps);
    perturb(ps, rng, 0.3);
    Parameter x = input_param("x", 5, 8, rng);
    ps.push_back(&x);
    const Matrix w = random_normal(5, 8, rng);
    return gradcheck([&](Tape& t) { return t.dot_const(blk.forward(t, t.param(x), {}), w); }, ps, opts);
  }
  if (name == "ctc") {
    Parameter logits = input_param("logits", 6, 5, rng);
    const std::vector<int> labels{2, 4, 4};
    return gradcheck([&](Tape& t) { return ctc_loss(t, t.param(logits), labels); }, {&logits}, opts);
  }
  if (name == "model") {
    SecondPassConfig cfg = SecondPassConfig::tiny(Variant::ModTac);
    cfg.input_dim = 12;
    SecondPassModel m(cfg);
    m.init(rng);
    for (Parameter* p : m.params()) {
      if (p->name.ends_with(".slope") || p->name.ends_with(".gamma") || p->name.ends_with(".beta")) {
        p->value.array() += random_normal(p->value.rows(), p->value.cols(), rng, 0.1).array();
      }
    }
    MultichannelBatch b;
    for (int c = 0; c < 3; ++c) b.channels.push_back(random_normal(5, 12, rng));
    b.selected = random_normal(5, 12, rng);
    const std::vector<int> labels{4, 9};
    return gradcheck([&](Tape& t) { return ctc_loss(t, m.encode(t, b), labels); }, m.params(), opts);
  }
  throw ConfigError("unknown gradcheck module '" + name + "'");
}

}  // namespace vtmc
