// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include <json.hpp>

#include "vtmc/features/logmel.hpp"

namespace vtmc {

struct FeatureConfig {
  int sample_rate = kSampleRate;
  int win = 400;  // 25 ms
  int hop = 160;  // 10 ms
  int n_mels = kMelBands;
  double fmin = 60.0;
  double fmax = 7600.0;
  double log_floor = 1e-10;
  int left_context = kContext;
  int right_context = kContext;

  double frame_shift() const { return static_cast<double>(hop) / sample_rate; }
  int feature_dim() const { return n_mels * (left_context + right_context + 1); }

  nlohmann::json to_json() const;
  static FeatureConfig from_json(const nlohmann::json& j);
};

/// Context-stacked features for one channel, T x 280.
struct FeatureSequence {
  Matrix frames;
  double frame_shift = 0.01;

  Index length() const { return frames.rows(); }
};

/// Per-dimension mean/variance normalization of log-mel frames, fitted on a
/// training corpus and carried inside every checkpoint.
class FeatureNormalizer {
 public:
  FeatureNormalizer() = default;

  void accumulate(const Matrix& mel);
  void finalize();
  bool ready() const { return mean_.size() > 0; }

  void apply(Matrix& mel) const;
  const Matrix& mean() const { return mean_; }
  const Matrix& inv_std() const { return inv_std_; }

  nlohmann::json to_json() const;
  static FeatureNormalizer from_json(const nlohmann::json& j);

 private:
  Eigen::VectorXd sum_;
  Eigen::VectorXd sumsq_;
  double count_ = 0;
  Matrix mean_;
  Matrix inv_std_;
};

class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig config = {});

  const FeatureConfig& config() const { return config_; }
  const MelFilterbank& filterbank() const { return bank_; }

  /// Raw (unnormalized) log-mel, T x 40.
  Matrix logmel(const AudioClip& clip) const;
  /// Log-mel -> optional normalization -> context stacking.
  FeatureSequence features(const AudioClip& clip, const FeatureNormalizer* norm = nullptr) const;
  FeatureSequence stack(Matrix mel, const FeatureNormalizer* norm = nullptr) const;

 private:
  FeatureConfig config_;
  MelFilterbank bank_;
};

}  // namespace vtmc
