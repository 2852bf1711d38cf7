// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vtmc/ctc/ctc.hpp"
#include "vtmc/features/extractor.hpp"
#include "vtmc/ndcore/checkpoint.hpp"
#include "vtmc/secondpass/encoder.hpp"
#include "vtmc/tac/tac.hpp"

namespace vtmc {

enum class Variant { Baseline, Tac, ModTac, Concat };

std::string variant_name(Variant v);
/// "baseline" | "tac" | "modtac" | "concat"; ConfigError otherwise.
Variant parse_variant(const std::string& name);
bool is_multichannel(Variant v);

struct SecondPassConfig {
  Variant variant = Variant::Baseline;
  Index input_dim = kFeatureDim;
  Index model_dim = 64;
  int blocks = 2;
  int heads = 4;
  Index ff_dim = 256;
  Index tac_hidden = 64;
  int tac_blocks = 1;
  Index outputs = kCtcClasses;
  bool pool_includes_sc = true;
  double dropout = 0.1;
  /// Channel count for the concatenation ablation only.
  int concat_channels = 4;

  /// dim 64, 2 blocks, 4 heads, FF 256, TAC hidden 64.
  static SecondPassConfig desk(Variant v);
  /// dim 256, 6 blocks, 4 heads, FF 1024, TAC hidden 3x256.
  static SecondPassConfig paper(Variant v);
  /// dim 8, 1 block, 2 heads, FF 16, TAC hidden 8; for gradient checks.
  static SecondPassConfig tiny(Variant v);
  static SecondPassConfig preset(const std::string& name, Variant v);

  nlohmann::json to_json() const;
  static SecondPassConfig from_json(const nlohmann::json& j);
};

/// Optional (Mod)TAC front, channel average pool, input projection with
/// sinusoidal positions, pre-norm encoder blocks, final norm, CTC logits.
class SecondPassModel {
 public:
  SecondPassModel() = default;
  explicit SecondPassModel(const SecondPassConfig& config);

  const SecondPassConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }

  void init(Rng& rng);
  ParamList params();

  /// Logits T x 55. Baseline reads `batch.selected`; TAC reads
  /// `batch.channels`; ModTAC reads both. A missing input is a ConfigError.
  Tape::Var encode(Tape& tape, const MultichannelBatch& batch, const ForwardContext& ctx = {}) const;
  Matrix encode(const MultichannelBatch& batch, std::vector<Matrix>* attention = nullptr) const;
  /// Baseline convenience: a single channel is the selected channel.
  Matrix encode(const FeatureSequence& single) const;

  /// Per-submodule scalar counts plus "total".
  std::vector<std::pair<std::string, Index>> count_params() const;
  Index total_params() const;

  std::string arch_tag() const { return "sp." + variant_name(config_.variant); }
  ModelCheckpoint to_checkpoint() const;
  static SecondPassModel from_checkpoint(const ModelCheckpoint& ckpt);

  std::vector<TacBlock> tac;
  std::vector<ModTacBlock> modtac;
  LinearLayer input_proj;
  std::vector<EncoderBlock> blocks;
  LayerNorm final_norm;
  LinearLayer output;

 private:
  SecondPassConfig config_;
};

/// keyword_score(encode(model, input), keyword)
double second_pass_score(const SecondPassModel& model, const MultichannelBatch& input,
                         const std::vector<int>& keyword);

}  // namespace vtmc
