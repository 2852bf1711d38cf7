// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <json.hpp>

#include "vtmc/ctc/ctc.hpp"
#include "vtmc/features/logmel.hpp"
#include "vtmc/firstpass/dnn.hpp"

namespace vtmc {

/// Phoneme ids: 0 is silence (and the CTC blank), 1..18 form the keyword
/// set, 19..54 are fillers.
inline constexpr int kSilencePhoneme = 0;
inline constexpr int kFirstFiller = kKeywordPhonemeClasses + 1;  // 19

/// The wake word: six phonemes from the keyword set.
const std::vector<int>& keyword_phonemes();
/// First-pass class of each keyword phoneme, in order.
std::vector<int> keyword_classes();
/// 1..18 -> 0..17, fillers -> other speech, silence -> silence.
int first_pass_class(int phoneme);
bool contains_keyword(const std::vector<int>& transcript);

struct PhonemeConfig {
  std::uint64_t seed = 20260101;
  int min_frames = 5;
  int max_frames = 11;
  int formants_min = 2;
  int formants_max = 3;
  double formant_db_min = 12.0;
  double formant_db_max = 24.0;
  double tilt_db_per_band = -0.3;
  /// Mel-band shift of the one formant that tells a keyword phoneme from its partner.
  double partner_shift_bands = 5.0;
  double min_template_distance_db = 30.0;
  double frame_jitter_db = 1.5;

  nlohmann::json to_json() const;
  static PhonemeConfig from_json(const nlohmann::json& j);
};

struct SpeakerStyle {
  double warp_bands = 0.0;  // shifts every formant
  double tilt_db = 0.0;     // extra dB per band
  /// Duration scale, 1 = nominal.
  double rate = 1.0;
};

struct Formant {
  double center = 0;  // mel band index
  double height_db = 0;
  double width = 1;
};

/// Per-phoneme mel-domain spectral prototypes with duration ranges. Each
/// keyword phoneme has a confusable filler partner that differs in one formant.
class PhonemeModel {
 public:
  explicit PhonemeModel(PhonemeConfig config = {});

  const PhonemeConfig& config() const { return config_; }
  /// 40-dim dB template for phoneme p under a speaker style; p = 0 is invalid.
  Eigen::VectorXd template_db(int p, const SpeakerStyle& style = {}) const;
  /// Template without speaker changes, non-negative (dB above the template floor).
  Eigen::VectorXd prototype(int p) const;
  int partner(int keyword_phoneme) const;
  const std::vector<Formant>& formants(int p) const { return formants_[static_cast<std::size_t>(p)]; }

 private:
  PhonemeConfig config_;
  std::vector<std::vector<Formant>> formants_;
  std::vector<int> partner_;
};

}  // namespace vtmc
