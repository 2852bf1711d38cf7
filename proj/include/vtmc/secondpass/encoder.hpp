// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "vtmc/ndcore/layers.hpp"

namespace vtmc {

/// Per-forward training context: dropout is active only when `rng` is set.
struct ForwardContext {
  Rng* rng = nullptr;
  double dropout = 0.0;
  /// When non-null, receives the attention probabilities of every head
  /// (block-major, head-minor), each T x T.
  std::vector<Matrix>* attention = nullptr;
};

Tape::Var apply_dropout(Tape& tape, Tape::Var x, const ForwardContext& ctx);

/// Pre-norm Transformer encoder block:
///   x = x + Wo . MHA(LN1(x))
///   x = x + FF2(ReLU(FF1(LN2(x))))
class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(const std::string& prefix, Index model_dim, int heads, Index ff_dim);

  Index model_dim() const { return wq.in_dim(); }
  int heads() const { return heads_; }

  void init(Rng& rng);
  void collect(ParamList& out);
  Tape::Var forward(Tape& tape, Tape::Var x, const ForwardContext& ctx) const;

  LayerNorm ln1;
  LinearLayer wq, wk, wv, wo;
  LayerNorm ln2;
  LinearLayer ff1, ff2;

 private:
  int heads_ = 1;
};

/// Additive sinusoidal position table, T x dim.
Matrix sinusoidal_positions(Index frames, Index dim);

}  // namespace vtmc
