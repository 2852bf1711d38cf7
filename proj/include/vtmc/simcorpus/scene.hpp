// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtmc/features/audio.hpp"
#include "vtmc/simcorpus/phonemes.hpp"

namespace vtmc {

enum class Condition { Quiet = 0, Noisy = 1, MediumPlayback = 2, LoudPlayback = 3 };
inline constexpr int kNumConditions = 4;
inline constexpr int kNumChannels = 4;

std::string condition_name(Condition c);
Condition parse_condition(const std::string& name);
const std::array<Condition, kNumConditions>& all_conditions();

/// What a separated output mostly contains.
enum class SeparatedRole { Target = 0, Interference = 1, Noise = 2 };

/// Every level, probability and layout parameter of the front-end emulation.
struct SceneConfig {
  double target_rms = 0.03;
  double floor_snr_db = 35.0;
  double noisy_snr_min_db = 0.0;
  double noisy_snr_max_db = 10.0;
  double interference_prob = 0.5;
  double sir_min_db = -3.0;
  double sir_max_db = 3.0;
  double medium_music_snr_db = -5.0;
  double loud_music_snr_db = -15.0;

  double distortion_prob_quiet = 0.3;
  double distortion_prob_other = 0.3;
  int notch_min = 2;
  int notch_max = 4;
  int notch_width_min_bins = 10;
  int notch_width_max_bins = 30;
  double notch_gain = 0.03;

  // residual amplitude gains left in the enhanced channel
  double enhanced_noise_gain = 0.25;
  double enhanced_interference_gain = 0.5;
  double enhanced_music_gain = 0.1;

  // separation: the target is split into time-frequency tiles, each owned by one output
  double fragment_main_prob = 0.7;
  int fragment_frames = 6;
  int fragment_bins = 16;
  double fragment_leak_gain = 0.1;
  double separation_leak_gain = 0.1;

  int lead_min_frames = 15;
  int lead_max_frames = 35;
  int tail_min_frames = 15;
  int tail_max_frames = 30;
  double prefix_prob = 0.3;
  double suffix_prob = 0.5;
  int phrase_min = 4;
  int phrase_max = 8;
  double near_miss_prob = 0.3;
  double warp_max_bands = 1.0;
  double tilt_max_db = 0.1;
  double rate_min = 0.85;
  double rate_max = 1.2;

  // negative streams
  int stream_gap_min_frames = 30;
  int stream_gap_max_frames = 200;

  nlohmann::json to_json() const;
  static SceneConfig from_json(const nlohmann::json& j);
};

struct SceneSpec {
  Condition condition = Condition::Quiet;
  bool keyword = false;
  bool near_miss = false;
  bool interference = false;
  bool distortion = false;
  double snr_db = 35.0;
  double sir_db = 0.0;
  double music_snr_db = 0.0;
  std::uint64_t perm_seed = 0;

  /// Role of channel j + 1 for j = 0..2; a uniformly random permutation of perm_seed.
  std::array<SeparatedRole, 3> roles() const;
  void validate() const;
  nlohmann::json to_json() const;
  static SceneSpec from_json(const nlohmann::json& j);
};

SceneSpec draw_scene(Condition condition, bool keyword, Rng& rng, const SceneConfig& cfg);

struct UtteranceRecord {
  std::string id;
  std::uint64_t seed = 0;
  SceneSpec spec;
  /// ch0 enhanced, ch1..3 separated (order from spec.roles()).
  std::array<AudioClip, kNumChannels> channels;
  AudioClip clean_target;
  int pseudo_sc = 0;
  std::vector<int> transcript;
  /// Target phoneme per feature frame (0 = silence).
  std::vector<int> frame_phones;
  Index keyword_start = -1;
  Index keyword_end = -1;  // inclusive

  bool keyword() const { return spec.keyword; }
  /// Channel index holding the target-dominant separated output.
  int target_channel() const;
  Index frames() const { return static_cast<Index>(frame_phones.size()); }
};

/// Deterministic in (spec, seed).
UtteranceRecord synth_utterance(const SceneSpec& spec, std::uint64_t seed, const PhonemeModel& phonemes,
                                const SceneConfig& cfg);

/// Long keyword-free audio for false-alarm measurement.
struct NegativeStream {
  Condition condition = Condition::Quiet;
  std::array<AudioClip, kNumChannels> channels;
  std::vector<std::vector<int>> phrases;
  double seconds() const { return channels[0].duration(); }
};

NegativeStream render_negative_stream(Condition condition, std::uint64_t seed, double seconds,
                                      const PhonemeModel& phonemes, const SceneConfig& cfg);

/// Random non-keyword phrase of `length` phonemes.
std::vector<int> random_phrase(int length, Rng& rng);
/// Keyword with one phoneme swapped for its partner, or a keyword prefix.
std::vector<int> near_miss_phrase(const PhonemeModel& phonemes, Rng& rng);

}  // namespace vtmc
