// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/tac/tac.hpp"

namespace vtmc {

void MultichannelBatch::validate(bool need_selected) const {
  if (channels.empty()) throw EmptyInputError("multichannel batch has no channels");
  const Index t = channels.front().rows();
  const Index f = channels.front().cols();
  for (const Matrix& c : channels) {
    if (c.rows() != t || c.cols() != f) throw DimensionError("multichannel batch: channel shapes differ");
  }
  if (need_selected && (selected.rows() != t || selected.cols() != f)) {
    throw DimensionError("multichannel batch: selected channel is not aligned with the others");
  }
}

TacBlock::TacBlock(const std::string& prefix, Index input_dim, Index hidden)
    : P(prefix + ".P", input_dim, hidden), Q(prefix + ".Q", hidden, hidden), R(prefix + ".R", 2 * hidden, input_dim) {}

void TacBlock::init(Rng& rng) {
  P.init(rng);
  Q.init(rng);
  R.init(rng);
}

void TacBlock::collect(ParamList& out) {
  P.collect(out);
  Q.collect(out);
  R.collect(out);
}

Tape::Var TacBlock::forward(Tape& tape, Tape::Var stacked, Index n_channels) const {
  const Index h = hidden();
  if (tape.value(stacked).cols() != input_dim()) throw DimensionError("tac: feature dim mismatch");
  const Tape::Var hid = P.forward(tape, stacked);
  const Tape::Var avg = Q.forward(tape, tape.mean_blocks(hid, n_channels));
  // R([h_i; h_avg]) split by input columns; the h_avg term is shared by all channels.
  const Tape::Var wr = tape.param(R.linear.weight);
  Tape::Var pre = tape.linear_cols(hid, wr, 0, h);
  pre = tape.add_tiled(pre, tape.linear_cols(avg, wr, h, h));
  pre = tape.add_bias(pre, tape.param(R.linear.bias));
  const Tape::Var res = R.act.forward(tape, pre);
  return tape.add(stacked, res);
}

std::vector<Matrix> TacBlock::forward(const std::vector<Matrix>& channels) const {
  Tape tape(false);
  const Tape::Var x = stack_channels(tape, channels);
  const Index n = static_cast<Index>(channels.size());
  return unstack_channels(tape.value(forward(tape, x, n)), n);
}

ModTacBlock::ModTacBlock(const std::string& prefix, Index input_dim, Index hidden)
    : P(prefix + ".P", input_dim, hidden),
      Q(prefix + ".Q", hidden, hidden),
      R(prefix + ".R", 3 * hidden, input_dim),
      S(prefix + ".S", hidden, input_dim) {}

void ModTacBlock::init(Rng& rng) {
  P.init(rng);
  Q.init(rng);
  R.init(rng);
  S.init(rng);
}

void ModTacBlock::collect(ParamList& out) {
  P.collect(out);
  Q.collect(out);
  R.collect(out);
  S.collect(out);
}

ModTacBlock::Output ModTacBlock::forward(Tape& tape, Tape::Var stacked, Index n_channels,
                                         Tape::Var selected) const {
  const Index h = hidden();
  const Matrix& sv = tape.value(selected);
  if (tape.value(stacked).cols() != input_dim() || sv.cols() != input_dim()) {
    throw DimensionError("modtac: feature dim mismatch");
  }
  if (n_channels < 1 || tape.value(stacked).rows() != n_channels * sv.rows()) {
    throw DimensionError("modtac: selected channel length does not match the regular channels");
  }
  const Tape::Var hid = P.forward(tape, stacked);
  const Tape::Var hsc = P.forward(tape, selected);
  const Tape::Var avg = Q.forward(tape, tape.mean_blocks(hid, n_channels));
  const Tape::Var wr = tape.param(R.linear.weight);
  const Tape::Var shared = tape.add(tape.linear_cols(avg, wr, h, h), tape.linear_cols(hsc, wr, 2 * h, h));
  Tape::Var pre = tape.add_tiled(tape.linear_cols(hid, wr, 0, h), shared);
  pre = tape.add_bias(pre, tape.param(R.linear.bias));
  Output out;
  out.channels = tape.add(stacked, R.act.forward(tape, pre));
  out.selected = tape.add(selected, S.forward(tape, hsc));
  return out;
}

std::pair<std::vector<Matrix>, Matrix> ModTacBlock::forward(const std::vector<Matrix>& channels,
                                                            const Matrix& selected) const {
  Tape tape(false);
  const Tape::Var x = stack_channels(tape, channels);
  if (selected.rows() != channels.front().rows() || selected.cols() != channels.front().cols()) {
    throw DimensionError("modtac: selected channel is not aligned with the others");
  }
  const Tape::Var sc = tape.input(selected);
  const Index n = static_cast<Index>(channels.size());
  const Output o = forward(tape, x, n, sc);
  return {unstack_channels(tape.value(o.channels), n), tape.value(o.selected)};
}

Matrix channel_average_pool(const std::vector<Matrix>& channels) {
  if (channels.empty()) throw EmptyInputError("channel_average_pool: no channels");
  Tape tape(false);
  const Tape::Var x = stack_channels(tape, channels);
  return tape.value(tape.mean_blocks(x, static_cast<Index>(channels.size())));
}

Tape::Var stack_channels(Tape& tape, const std::vector<Matrix>& channels) {
  if (channels.empty()) throw EmptyInputError("no channels");
  const Index t = channels.front().rows();
  const Index f = channels.front().cols();
  Matrix stacked(t * static_cast<Index>(channels.size()), f);
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].rows() != t || channels[i].cols() != f) {
      throw DimensionError("channel " + std::to_string(i) + " length/width differs from channel 0");
    }
    stacked.middleRows(static_cast<Index>(i) * t, t) = channels[i];
  }
  return tape.input(std::move(stacked));
}

std::vector<Matrix> unstack_channels(const Matrix& stacked, Index n_channels) {
  if (n_channels < 1 || stacked.rows() % n_channels != 0) throw DimensionError("unstack_channels: bad block count");
  const Index t = stacked.rows() / n_channels;
  std::vector<Matrix> out;
  for (Index i = 0; i < n_channels; ++i) out.emplace_back(stacked.middleRows(i * t, t));
  return out;
}

}  // namespace vtmc
