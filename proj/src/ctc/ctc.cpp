// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/ctc/ctc.hpp"

#include <cmath>
#include <limits>

namespace vtmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_labels(const std::vector<int>& labels, Index alphabet, int blank) {
  if (labels.empty()) throw LabelError("ctc: empty label sequence");
  if (blank < 0 || blank >= alphabet) throw LabelError("ctc: blank id outside the alphabet");
  for (int id : labels) {
    if (id < 0 || id >= alphabet) throw LabelError("ctc: label id " + std::to_string(id) + " outside the alphabet");
    if (id == blank) throw LabelError("ctc: label sequence contains the blank id");
  }
}

std::vector<int> augment(const std::vector<int>& labels, int blank) {
  std::vector<int> ext;
  ext.reserve(2 * labels.size() + 1);
  ext.push_back(blank);
  for (int id : labels) {
    ext.push_back(id);
    ext.push_back(blank);
  }
  return ext;
}

// Whether state s may be entered from s-2 (skip over a blank).
bool can_skip(const std::vector<int>& ext, std::size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

// alpha(t, s): log prob of prefixes ending in augmented state s at frame t, emission included.
Matrix forward_table(const Matrix& logp, const std::vector<int>& ext, int blank) {
  const Index t_len = logp.rows();
  const auto s_len = static_cast<Index>(ext.size());
  Matrix alpha = Matrix::Constant(t_len, s_len, kNegInf);
  alpha(0, 0) = logp(0, ext[0]);
  if (s_len > 1) alpha(0, 1) = logp(0, ext[1]);
  for (Index t = 1; t < t_len; ++t) {
    for (Index s = 0; s < s_len; ++s) {
      const auto su = static_cast<std::size_t>(s);
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(ext, su, blank)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + logp(t, ext[su]);
    }
  }
  return alpha;
}

// beta(t, s): log prob of emitting frames t+1.. given state s at frame t (emission at t excluded).
Matrix backward_table(const Matrix& logp, const std::vector<int>& ext, int blank) {
  const Index t_len = logp.rows();
  const auto s_len = static_cast<Index>(ext.size());
  Matrix beta = Matrix::Constant(t_len, s_len, kNegInf);
  beta(t_len - 1, s_len - 1) = 0.0;
  if (s_len > 1) beta(t_len - 1, s_len - 2) = 0.0;
  for (Index t = t_len - 1; t-- > 0;) {
    for (Index s = 0; s < s_len; ++s) {
      double b = beta(t + 1, s) + logp(t + 1, ext[static_cast<std::size_t>(s)]);
      if (s + 1 < s_len) b = log_add(b, beta(t + 1, s + 1) + logp(t + 1, ext[static_cast<std::size_t>(s + 1)]));
      if (s + 2 < s_len && can_skip(ext, static_cast<std::size_t>(s + 2), blank)) {
        b = log_add(b, beta(t + 1, s + 2) + logp(t + 1, ext[static_cast<std::size_t>(s + 2)]));
      }
      beta(t, s) = b;
    }
  }
  return beta;
}

double total_logprob(const Matrix& alpha) {
  const Index last = alpha.rows() - 1;
  const Index s_len = alpha.cols();
  double p = alpha(last, s_len - 1);
  if (s_len > 1) p = log_add(p, alpha(last, s_len - 2));
  return p;
}

}  // namespace

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

Index ctc_min_frames(const std::vector<int>& labels) {
  Index n = static_cast<Index>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

double ctc_forward_logprob(const Matrix& logits, const std::vector<int>& labels, int blank) {
  validate_labels(labels, logits.cols(), blank);
  if (logits.rows() < ctc_min_frames(labels)) return kNegInf;
  const Matrix logp = log_softmax_rows(logits);
  return total_logprob(forward_table(logp, augment(labels, blank), blank));
}

CtcLossResult ctc_loss_grad(const Matrix& logits, const std::vector<int>& labels, int blank) {
  validate_labels(labels, logits.cols(), blank);
  CtcLossResult res;
  res.grad = Matrix::Zero(logits.rows(), logits.cols());
  if (logits.rows() < ctc_min_frames(labels)) {
    res.loss = std::numeric_limits<double>::infinity();
    res.feasible = false;
    return res;
  }
  const Matrix logp = log_softmax_rows(logits);
  const std::vector<int> ext = augment(labels, blank);
  const Matrix alpha = forward_table(logp, ext, blank);
  const Matrix beta = backward_table(logp, ext, blank);
  const double total = total_logprob(alpha);
  res.loss = -total;
  // dL/dz_tk = y_tk - sum_{s: ext[s]=k} exp(alpha_ts + beta_ts - total)
  Matrix occupancy = Matrix::Constant(logits.rows(), logits.cols(), kNegInf);
  for (Index t = 0; t < logits.rows(); ++t) {
    for (std::size_t s = 0; s < ext.size(); ++s) {
      const double v = alpha(t, static_cast<Index>(s)) + beta(t, static_cast<Index>(s));
      occupancy(t, ext[s]) = log_add(occupancy(t, ext[s]), v);
    }
  }
  res.grad = logp.array().exp() - (occupancy.array() - total).exp();
  return res;
}

double best_path_logprob(const Matrix& logits) {
  return log_softmax_rows(logits).rowwise().maxCoeff().sum();
}

double keyword_score(const Matrix& logits, const std::vector<int>& keyword, int blank) {
  if (logits.rows() == 0) throw EmptyInputError("keyword_score: no frames");
  const double kw = ctc_forward_logprob(logits, keyword, blank);
  return (kw - best_path_logprob(logits)) / static_cast<double>(logits.rows());
}

Tape::Var ctc_loss(Tape& tape, Tape::Var logits, const std::vector<int>& labels, int blank) {
  CtcLossResult r = ctc_loss_grad(tape.value(logits), labels, blank);
  if (!r.feasible) throw TrainingError("ctc: sequence too short for its labels");
  return tape.custom_loss(logits, r.loss, std::move(r.grad));
}

}  // namespace vtmc
