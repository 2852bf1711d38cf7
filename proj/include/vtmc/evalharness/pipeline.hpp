// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtmc/evalharness/operating_point.hpp"
#include "vtmc/trainloop/train.hpp"

namespace vtmc {

using ChannelMel = std::array<Matrix, kNumChannels>;

struct PipelineConfig {
  /// First-pass gate; windows at or below it never reach the second pass.
  double fp_threshold = 0.0;
  /// Fraction of dev positives the calibrated gate keeps.
  double fp_keep_rate = 0.98;
  int segment_padding = 20;
  /// Frames searched after a gate crossing for the score peak.
  int lookahead_frames = 30;
  /// Frames after a peak during which no new window opens.
  int refractory_frames = 50;
  double dedup_seconds = 2.0;
  double target_fa_per_hour = 0.5;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

/// Raw log-mel of every channel.
ChannelMel channel_mel(const std::array<AudioClip, kNumChannels>& audio, const FeatureExtractor& fx);
ChannelMel channel_mel(const CachedUtterance& u);

/// Normalized, context-stacked rows [start, end] of one channel; identical to
/// stacking the whole channel and slicing.
Matrix stacked_rows(const FeatureExtractor& fx, const Matrix& mel, const FeatureNormalizer& norm, Index start, Index end);

struct FirstPassScan {
  std::array<TriggerResult, kNumChannels> channel;
  TriggerResult selected;  // .channel is the selected channel
};

/// Best keyword segment per channel, then the highest-scoring channel.
FirstPassScan first_pass_scan(const FirstPassBundle& fp, const FeatureExtractor& fx, const ChannelMel& mel);

/// Gate crossings on long audio. At every frame the channel with the highest
/// streaming score is taken; a crossing opens a window of lookahead frames,
/// the peak inside it becomes the trigger, and a refractory period follows.
std::vector<TriggerResult> first_pass_stream(const FirstPassBundle& fp, const FeatureExtractor& fx,
                                             const ChannelMel& mel, const PipelineConfig& cfg);

/// Second-pass keyword score of the segment [start - pad, end + pad] using the
/// selected channel and all channels.
double second_pass_segment(const SecondPassBundle& sp, const FeatureExtractor& fx, const ChannelMel& mel,
                           const TriggerResult& trigger, int pad);

/// Gate that keeps `keep_rate` of the positives in `dev` (lower quantile of
/// their first-pass scores).
double calibrate_first_pass(const FirstPassBundle& fp, const Dataset& dev, double keep_rate);

struct NamedModel {
  std::string variant;
  const SecondPassBundle* model = nullptr;
};

struct UtteranceScore {
  std::string utt_id;
  Condition condition = Condition::Quiet;
  bool keyword = false;
  int target_channel = 1;
  FirstPassScan scan;
  bool forwarded = false;
  std::vector<double> scores;  // per model; -inf when not forwarded
};

struct StreamEvent {
  TriggerResult trigger;
  double time = 0;
  std::vector<double> scores;
};

struct StreamScore {
  std::string id;
  Condition condition = Condition::Quiet;
  double seconds = 0;
  std::vector<StreamEvent> events;
};

struct ScoreTable {
  std::vector<std::string> variants;
  PipelineConfig config;
  std::vector<UtteranceScore> utterances;
  std::vector<StreamScore> negatives;
  std::vector<std::string> errors;

  std::size_t variant_index(const std::string& v) const;
  /// Keyword utterances only.
  std::vector<PositiveScore> positives(const std::string& variant) const;
  NegativeSet negative_set(const std::string& variant) const;
  double negative_seconds() const;

  std::string utterance_tsv() const;
  std::string negative_tsv() const;
};

/// <dir>/scores.json (variants, pipeline config, errors), utterances.tsv,
/// negatives.tsv (one row per event) and negative_files.tsv (id, condition,
/// seconds). Scores are printed with 17 significant digits so a read gives back
/// the same doubles.
void write_score_table(const ScoreTable& table, const std::filesystem::path& dir);
ScoreTable read_score_table(const std::filesystem::path& dir);

using Progress = std::function<void(const std::string&)>;

/// Runs the first pass once per record and negative file and scores every
/// forwarded window with each model. Negative files are rendered from their
/// seeds. Unreadable records are reported in `errors` and skipped.
ScoreTable score_corpus(const FirstPassBundle& fp, const std::vector<NamedModel>& models, const DatasetManifest& split,
                        const CorpusConfig& corpus, const PipelineConfig& cfg, const Progress& progress = {});

/// Score table built from already-loaded utterances (no negatives).
ScoreTable score_utterances(const FirstPassBundle& fp, const std::vector<NamedModel>& models, const Dataset& data,
                            const PipelineConfig& cfg);

}  // namespace vtmc
