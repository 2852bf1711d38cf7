// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "vtmc/features/logmel.hpp"
#include "vtmc/ndcore/layers.hpp"

namespace vtmc {

/// 18 keyword-phoneme classes, then silence, then any other speech.
inline constexpr int kKeywordPhonemeClasses = 18;
inline constexpr int kSilenceClass = 18;
inline constexpr int kOtherSpeechClass = 19;
inline constexpr int kFirstPassClasses = 20;

struct FirstPassConfig {
  Index input_dim = kFeatureDim;
  Index hidden = 64;
  int layers = 5;
  Index classes = kFirstPassClasses;
};

/// Frame classifier: `layers` x `hidden` ReLU stack and a softmax output.
class FirstPassDnn {
 public:
  FirstPassDnn() = default;
  explicit FirstPassDnn(const FirstPassConfig& config, const std::string& prefix = "fp.dnn");

  const FirstPassConfig& config() const { return config_; }
  void init(Rng& rng);
  void collect(ParamList& out);

  Tape::Var logits(Tape& tape, Tape::Var x) const;
  /// T x 20 per-frame posteriors; rows sum to one.
  Matrix posteriors(const Matrix& features) const;

 private:
  FirstPassConfig config_;
  std::vector<LinearLayer> hidden_;
  LinearLayer output_;
};

/// dnn_posteriors(model, feats)
Matrix dnn_posteriors(const FirstPassDnn& model, const Matrix& features);

}  // namespace vtmc
