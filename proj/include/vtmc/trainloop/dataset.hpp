// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "vtmc/features/extractor.hpp"
#include "vtmc/simcorpus/corpus.hpp"
#include "vtmc/tac/tac.hpp"

namespace vtmc {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One record with its raw log-mel per channel held as float.
struct CachedUtterance {
  std::string id;
  Condition condition = Condition::Quiet;
  bool keyword = false;
  int pseudo_sc = 0;
  int target_channel = 1;
  std::vector<int> transcript;
  std::vector<int> frame_phones;  // empty without alignments
  Index keyword_start = -1;
  Index keyword_end = -1;
  std::array<MatrixF, kNumChannels> mel;

  Index frames() const { return mel[0].rows(); }
};

class Dataset {
 public:
  Dataset() = default;

  /// Reads every record's WAVs and computes log-mel. Records that fail to load
  /// are skipped and listed in `errors`.
  static Dataset load(const DatasetManifest& manifest, const FeatureExtractor& fx, std::size_t limit = 0);

  std::size_t size() const { return items_.size(); }
  const CachedUtterance& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<std::string>& errors() const { return errors_; }
  const FeatureExtractor& extractor() const { return fx_; }

  /// Normalizer over channel 0 of every record.
  FeatureNormalizer fit_normalizer() const;

  /// Normalized, context-stacked features of one channel, T x 280.
  Matrix features(std::size_t i, int channel, const FeatureNormalizer& norm) const;
  /// All channels plus the pseudo-selected one.
  MultichannelBatch batch(std::size_t i, const FeatureNormalizer& norm) const;

 private:
  FeatureExtractor fx_;
  std::vector<CachedUtterance> items_;
  std::vector<std::string> errors_;
};

/// Multichannel input built from stacked per-channel features, with `selected`
/// a copy of channel `sc`.
MultichannelBatch make_batch(std::vector<Matrix> channels, int sc);

}  // namespace vtmc
