// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vtmc/ndcore/layers.hpp"

namespace vtmc {

inline constexpr int kSyntheticChannel = -1;

/// N time-aligned channels plus the selected channel, all T x F.
struct MultichannelBatch {
  std::vector<Matrix> channels;
  Matrix selected;
  /// Index into `channels` the selection came from, or kSyntheticChannel.
  int selected_index = kSyntheticChannel;

  Index length() const { return channels.empty() ? selected.rows() : channels.front().rows(); }
  /// Throws DimensionError on mismatched T or F and EmptyInputError if N = 0.
  void validate(bool need_selected) const;
};

/// Transform-average-concatenate block:
///   h_i   = P(z_i)
///   h_avg = Q(mean_i h_i)
///   z'_i  = z_i + R([h_i; h_avg])
/// where each of P, Q, R is linear + PReLU. Channels are passed stacked as an
/// (N*T) x F matrix, channel-major.
class TacBlock {
 public:
  TacBlock() = default;
  TacBlock(const std::string& prefix, Index input_dim, Index hidden);

  Index input_dim() const { return P.linear.in_dim(); }
  Index hidden() const { return P.linear.out_dim(); }

  void init(Rng& rng);
  void collect(ParamList& out);

  Tape::Var forward(Tape& tape, Tape::Var stacked, Index n_channels) const;
  std::vector<Matrix> forward(const std::vector<Matrix>& channels) const;

  LinearPrelu P, Q, R;
};

/// TAC with the selected channel folded in:
///   h_sc   = P(z_sc)
///   z'_i   = z_i + R([h_i; h_avg; h_sc])     (average over the N regular channels only)
///   z'_sc  = z_sc + S(h_sc)
class ModTacBlock {
 public:
  struct Output {
    Tape::Var channels;
    Tape::Var selected;
  };

  ModTacBlock() = default;
  ModTacBlock(const std::string& prefix, Index input_dim, Index hidden);

  Index input_dim() const { return P.linear.in_dim(); }
  Index hidden() const { return P.linear.out_dim(); }

  void init(Rng& rng);
  void collect(ParamList& out);

  Output forward(Tape& tape, Tape::Var stacked, Index n_channels, Tape::Var selected) const;
  std::pair<std::vector<Matrix>, Matrix> forward(const std::vector<Matrix>& channels, const Matrix& selected) const;

  LinearPrelu P, Q, R, S;
};

/// Arithmetic mean over channels (pairwise summation). EmptyInputError if M = 0.
Matrix channel_average_pool(const std::vector<Matrix>& channels);

/// Validates equal shapes and stacks channels into one (N*T) x F tape input.
Tape::Var stack_channels(Tape& tape, const std::vector<Matrix>& channels);

std::vector<Matrix> unstack_channels(const Matrix& stacked, Index n_channels);

}  // namespace vtmc
