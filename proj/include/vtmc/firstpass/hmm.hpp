// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <vector>

#include <json.hpp>

#include "vtmc/firstpass/dnn.hpp"

namespace vtmc {

struct HmmConfig {
  /// First-pass class of each keyword phoneme, in keyword order.
  std::vector<int> keyword_classes;
  int states_per_phoneme = 3;
  double keyword_self_loop = 0.6;  // advance = 1 - self loop
  double background_self_loop = 0.9;
  int silence_class = kSilenceClass;
  int other_class = kOtherSpeechClass;
  double posterior_floor = 1e-8;

  nlohmann::json to_json() const;
  static HmmConfig from_json(const nlohmann::json& j);
};

/// Left-to-right keyword model scored against a silence/filler background.
///
/// Per frame the background emits b(t) = log max(p_sil, p_other) + log(bg self
/// loop), i.e. the best background state at self-loop cost. Keyword state j
/// emits log p(class_j). A keyword path over frames [s, e] accumulates
/// emissions plus self-loop/advance transition logs and is compared against
/// the background over the same frames; the trigger score is that
/// log-likelihood ratio divided by e - s + 1.
class KeywordHmm {
 public:
  explicit KeywordHmm(HmmConfig config);

  const HmmConfig& config() const { return config_; }
  Index num_states() const { return static_cast<Index>(state_class_.size()); }
  int state_class(Index s) const { return state_class_[static_cast<std::size_t>(s)]; }
  double log_self() const { return log_self_; }
  double log_advance() const { return log_advance_; }
  double log_background_self() const { return log_bg_self_; }

  /// Keyword emission minus background emission for state s at a posterior row.
  double emission_llr(Index s, const double* row) const;
  /// The background term b(t) for a posterior row.
  double background(const double* row) const;

 private:
  HmmConfig config_;
  std::vector<int> state_class_;
  double log_self_;
  double log_advance_;
  double log_bg_self_;
};

struct TriggerResult {
  double score = -std::numeric_limits<double>::infinity();
  int channel = 0;
  Index start = 0;  // first frame of the keyword segment
  Index end = 0;    // last frame, inclusive

  bool triggered(double threshold) const { return score > threshold; }
};

/// Frame-synchronous Viterbi over the keyword states. Work per frame is
/// O(states); nothing looks ahead of the current frame.
class StreamingKeywordDecoder {
 public:
  struct Frame {
    double llr = -std::numeric_limits<double>::infinity();  // best keyword path ending at this frame
    Index start = 0;
    double score = -std::numeric_limits<double>::infinity();  // llr / segment length
  };

  explicit StreamingKeywordDecoder(const KeywordHmm& hmm);

  /// Consumes one posterior row (length >= number of classes).
  Frame push(const double* posterior_row);
  /// Best segment seen so far (ties keep the earliest end frame).
  const TriggerResult& best() const { return best_; }
  Index frames() const { return t_; }
  void reset();

 private:
  const KeywordHmm* hmm_;
  std::vector<double> delta_;
  std::vector<Index> start_;
  std::vector<double> next_delta_;
  std::vector<Index> next_start_;
  Index t_ = 0;
  TriggerResult best_;
};

/// Streams every row of `posteriors` through a fresh decoder and returns the
/// best segment. EmptyInputError when T = 0.
TriggerResult hmm_decode_stream(const KeywordHmm& hmm, const Matrix& posteriors);

/// Highest score wins; ties go to the lowest index. The returned result's
/// channel is its position in `results`.
TriggerResult select_channel(const std::vector<TriggerResult>& results);

}  // namespace vtmc
