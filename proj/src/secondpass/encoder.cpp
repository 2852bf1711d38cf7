// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/secondpass/encoder.hpp"

#include <cmath>

namespace vtmc {

Tape::Var apply_dropout(Tape& tape, Tape::Var x, const ForwardContext& ctx) {
  if (ctx.rng == nullptr || ctx.dropout <= 0.0) return x;
  const Matrix& v = tape.value(x);
  std::bernoulli_distribution keep(1.0 - ctx.dropout);
  const double scale = 1.0 / (1.0 - ctx.dropout);
  Matrix m(v.rows(), v.cols());
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*ctx.rng) ? scale : 0.0;
  return tape.mask(x, m);
}

EncoderBlock::EncoderBlock(const std::string& prefix, Index model_dim, int heads, Index ff_dim)
    : ln1(prefix + ".ln1", model_dim),
      wq(prefix + ".attn.q", model_dim, model_dim),
      wk(prefix + ".attn.k", model_dim, model_dim),
      wv(prefix + ".attn.v", model_dim, model_dim),
      wo(prefix + ".attn.o", model_dim, model_dim),
      ln2(prefix + ".ln2", model_dim),
      ff1(prefix + ".ff1", model_dim, ff_dim),
      ff2(prefix + ".ff2", ff_dim, model_dim),
      heads_(heads) {
  if (heads < 1 || model_dim % heads != 0) throw ConfigError("encoder: model dim must be divisible by heads");
}

void EncoderBlock::init(Rng& rng) {
  for (LinearLayer* l : {&wq, &wk, &wv, &wo, &ff1, &ff2}) l->init(rng);
}

void EncoderBlock::collect(ParamList& out) {
  ln1.collect(out);
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
  ln2.collect(out);
  ff1.collect(out);
  ff2.collect(out);
}

Tape::Var EncoderBlock::forward(Tape& tape, Tape::Var x, const ForwardContext& ctx) const {
  const Index d = model_dim();
  if (tape.value(x).cols() != d) throw DimensionError("encoder block: width mismatch");
  const Index dh = d / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tape::Var n1 = ln1.forward(tape, x);
  const Tape::Var q = wq.forward(tape, n1);
  const Tape::Var k = wk.forward(tape, n1);
  const Tape::Var v = wv.forward(tape, n1);
  std::vector<Tape::Var> heads;
  for (int h = 0; h < heads_; ++h) {
    const Tape::Var qh = tape.slice_cols(q, h * dh, dh);
    const Tape::Var kh = tape.slice_cols(k, h * dh, dh);
    const Tape::Var vh = tape.slice_cols(v, h * dh, dh);
    const Tape::Var att = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), inv_sqrt));
    if (ctx.attention) ctx.attention->push_back(tape.value(att));
    heads.push_back(tape.matmul(apply_dropout(tape, att, ctx), vh));
  }
  const Tape::Var attn = wo.forward(tape, heads.size() == 1 ? heads.front() : tape.hstack(heads));
  x = tape.add(x, apply_dropout(tape, attn, ctx));

  const Tape::Var n2 = ln2.forward(tape, x);
  const Tape::Var ff = ff2.forward(tape, apply_dropout(tape, tape.relu(ff1.forward(tape, n2)), ctx));
  return tape.add(x, apply_dropout(tape, ff, ctx));
}

Matrix sinusoidal_positions(Index frames, Index dim) {
  Matrix pe(frames, dim);
  for (Index t = 0; t < frames; ++t) {
    for (Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(t, i) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe;
}

}  // namespace vtmc
