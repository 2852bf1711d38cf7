// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/trainloop/dataset.hpp"

namespace vtmc {

Dataset Dataset::load(const DatasetManifest& manifest, const FeatureExtractor& fx, std::size_t limit) {
  Dataset d;
  d.fx_ = fx;
  const std::size_t n = limit > 0 ? std::min(limit, manifest.rows.size()) : manifest.rows.size();
  d.items_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ManifestRow& row = manifest.rows[i];
    CachedUtterance u;
    u.id = row.utt_id;
    u.condition = row.condition;
    u.keyword = row.keyword;
    u.pseudo_sc = row.pseudo_sc;
    u.transcript = row.transcript;
    if (i < manifest.alignments.size()) {
      const AlignmentRow& a = manifest.alignments[i];
      u.frame_phones = a.frame_phones;
      u.keyword_start = a.keyword_start;
      u.keyword_end = a.keyword_end;
      u.target_channel = a.target_channel;
    }
    try {
      for (int c = 0; c < kNumChannels; ++c) {
        u.mel[static_cast<std::size_t>(c)] = fx.logmel(read_wav(manifest.channel_path(row, c))).cast<float>();
      }
    } catch (const Error& e) {
      d.errors_.push_back(row.utt_id + ": " + e.what());
      continue;
    }
    d.items_.push_back(std::move(u));
  }
  return d;
}

FeatureNormalizer Dataset::fit_normalizer() const {
  FeatureNormalizer norm;
  for (const auto& u : items_) norm.accumulate(u.mel[0].cast<double>());
  norm.finalize();
  return norm;
}

Matrix Dataset::features(std::size_t i, int channel, const FeatureNormalizer& norm) const {
  return fx_.stack(items_[i].mel[static_cast<std::size_t>(channel)].cast<double>(), &norm).frames;
}

MultichannelBatch Dataset::batch(std::size_t i, const FeatureNormalizer& norm) const {
  std::vector<Matrix> ch;
  for (int c = 0; c < kNumChannels; ++c) ch.push_back(features(i, c, norm));
  return make_batch(std::move(ch), items_[i].pseudo_sc);
}

MultichannelBatch make_batch(std::vector<Matrix> channels, int sc) {
  MultichannelBatch b;
  b.selected = channels.at(static_cast<std::size_t>(sc));
  b.selected_index = sc;
  b.channels = std::move(channels);
  return b;
}

}  // namespace vtmc
