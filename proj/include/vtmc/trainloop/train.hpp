// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtmc/firstpass/hmm.hpp"
#include "vtmc/ndcore/adam.hpp"
#include "vtmc/secondpass/model.hpp"
#include "vtmc/trainloop/dataset.hpp"

namespace vtmc {

struct TrainConfig {
  /// baseline | tac | modtac | concat | firstpass
  std::string variant = "modtac";
  std::string preset = "desk";
  int epochs = 28;
  double lr = 5e-4;
  double decay_factor = 4.0;
  std::vector<int> decay_epochs{11, 17, 23};
  int batch_size = 8;
  /// Utterances per tape inside a batch; 0 puts the whole batch on one tape.
  int shard_size = 0;
  /// Utterances per first-pass minibatch (all their frames).
  int fp_batch_utterances = 8;
  double dropout = 0.1;
  std::uint64_t seed = 1;
  FirstPassConfig first_pass;
  HmmConfig hmm;

  TrainConfig();
  bool is_first_pass() const { return variant == "firstpass"; }
  SecondPassConfig second_pass() const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Learning rate for a 1-based epoch: lr, divided by decay_factor at every
/// decay epoch reached.
double learning_rate(const TrainConfig& cfg, int epoch);

/// HMM over the keyword's first-pass classes.
HmmConfig keyword_hmm_config();

struct DevMetrics {
  double loss = 0;
  double pos_mean = 0;
  double neg_mean = 0;
  double gap = 0;
  double gap_stderr = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double frame_accuracy = 0;  // first pass only
};

/// Mean CTC loss and keyword-score separation with the pseudo-selected channel.
DevMetrics evaluate_dev(const SecondPassModel& model, const Dataset& dev, const FeatureNormalizer& norm);
/// Frame cross-entropy, frame accuracy and HMM trigger-score separation on channel 0.
DevMetrics evaluate_dev(const FirstPassDnn& model, const HmmConfig& hmm, const Dataset& dev, const FeatureNormalizer& norm);

struct BatchGradient {
  double loss = 0;  // mean over used utterances
  std::size_t used = 0;
  std::vector<Matrix> grads;  // aligned with the parameter list
};

/// Mean CTC loss gradient over `items`. Each utterance gets its own dropout
/// stream seeded from (dropout_seed, item index), so sharding does not change
/// the result beyond rounding. Utterances too short for their transcript are skipped.
BatchGradient batch_gradient(const SecondPassModel& model, ParamList params, const Dataset& data,
                             const FeatureNormalizer& norm, const std::vector<std::size_t>& items, int shard_size,
                             std::uint64_t dropout_seed, double dropout);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  DevMetrics dev;
  double seconds = 0;
};

std::string metrics_header();
std::string metrics_line(const EpochMetrics& m);

struct TrainResult {
  std::filesystem::path best_checkpoint;
  int best_epoch = 0;
  std::vector<EpochMetrics> metrics;
};

/// Trains one model, writing <out>/train_config.json, <out>/metrics.tsv (one line
/// per epoch), <out>/best.ckpt (best dev loss) and <out>/last.ckpt. A
/// non-finite loss stops training with TrainingError after last.ckpt holds the
/// last good weights.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& dev_set,
                  const std::filesystem::path& out_dir);

struct FirstPassBundle {
  FirstPassDnn dnn;
  FeatureNormalizer norm;
  HmmConfig hmm;
};

struct SecondPassBundle {
  SecondPassModel model;
  FeatureNormalizer norm;
};

ModelCheckpoint first_pass_checkpoint(const FirstPassDnn& dnn, const FeatureNormalizer& norm, const HmmConfig& hmm);
FirstPassBundle load_first_pass(const ModelCheckpoint& ckpt);
ModelCheckpoint second_pass_checkpoint(const SecondPassModel& model, const FeatureNormalizer& norm);
SecondPassBundle load_second_pass(const ModelCheckpoint& ckpt);

}  // namespace vtmc
