// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "vtmc/ndcore/tape.hpp"

namespace vtmc {

inline constexpr int kBlank = 0;
inline constexpr int kNumPhonemes = 54;
inline constexpr int kCtcClasses = kNumPhonemes + 1;  // phonemes 1..54 plus blank 0

/// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

/// Numerically safe log(exp(a) + exp(b)) with -inf operands.
double log_add(double a, double b);

/// Minimum frames for a label sequence under the collapse rule: one frame per
/// label plus one blank between each pair of equal neighbours.
Index ctc_min_frames(const std::vector<int>& labels);

/// log p(labels | logits) summed over all alignments that collapse to
/// `labels` (merge repeats, then drop blanks). Returns -inf when T is below
/// ctc_min_frames. Throws LabelError on an empty sequence, the blank id, or an
/// id outside the logit alphabet.
double ctc_forward_logprob(const Matrix& logits, const std::vector<int>& labels, int blank = kBlank);

struct CtcLossResult {
  double loss = 0;  // -log p, +inf when infeasible
  Matrix grad;      // d loss / d logits; all zero when infeasible
  bool feasible = true;
};

/// Loss and logit gradient via the forward-backward recursions.
CtcLossResult ctc_loss_grad(const Matrix& logits, const std::vector<int>& labels, int blank = kBlank);

/// Sum over frames of the best per-frame log posterior (unconstrained best path).
double best_path_logprob(const Matrix& logits);

/// (ctc_forward_logprob(keyword) - best_path_logprob) / T; higher means more
/// keyword-like. Near 0 when the keyword alignment is the dominant path. It
/// can exceed 0 for flat posteriors, where many keyword alignments together
/// outweigh the single best path.
double keyword_score(const Matrix& logits, const std::vector<int>& keyword, int blank = kBlank);

/// Records a CTC loss node on the tape. Throws TrainingError when infeasible;
/// callers screen with ctc_min_frames first.
Tape::Var ctc_loss(Tape& tape, Tape::Var logits, const std::vector<int>& labels, int blank = kBlank);

}  // namespace vtmc
