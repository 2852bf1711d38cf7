// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/simcorpus/phonemes.hpp"

#include <cmath>

namespace vtmc {

const std::vector<int>& keyword_phonemes() {
  static const std::vector<int> kw{3, 8, 1, 14, 6, 11};
  return kw;
}

std::vector<int> keyword_classes() {
  std::vector<int> out;
  for (int p : keyword_phonemes()) out.push_back(first_pass_class(p));
  return out;
}

int first_pass_class(int phoneme) {
  if (phoneme < 0 || phoneme > kNumPhonemes) throw LabelError("phoneme id out of range: " + std::to_string(phoneme));
  if (phoneme == kSilencePhoneme) return kSilenceClass;
  if (phoneme < kFirstFiller) return phoneme - 1;
  return kOtherSpeechClass;
}

bool contains_keyword(const std::vector<int>& transcript) {
  const auto& kw = keyword_phonemes();
  std::size_t j = 0;
  for (int p : transcript) {
    if (j < kw.size() && p == kw[j]) ++j;
  }
  return j == kw.size();
}

nlohmann::json PhonemeConfig::to_json() const {
  return {{"seed", seed},
          {"min_frames", min_frames},
          {"max_frames", max_frames},
          {"formants_min", formants_min},
          {"formants_max", formants_max},
          {"formant_db_min", formant_db_min},
          {"formant_db_max", formant_db_max},
          {"tilt_db_per_band", tilt_db_per_band},
          {"partner_shift_bands", partner_shift_bands},
          {"min_template_distance_db", min_template_distance_db},
          {"frame_jitter_db", frame_jitter_db}};
}

PhonemeConfig PhonemeConfig::from_json(const nlohmann::json& j) {
  PhonemeConfig c;
  c.seed = j.value("seed", c.seed);
  c.min_frames = j.value("min_frames", c.min_frames);
  c.max_frames = j.value("max_frames", c.max_frames);
  c.formants_min = j.value("formants_min", c.formants_min);
  c.formants_max = j.value("formants_max", c.formants_max);
  c.formant_db_min = j.value("formant_db_min", c.formant_db_min);
  c.formant_db_max = j.value("formant_db_max", c.formant_db_max);
  c.tilt_db_per_band = j.value("tilt_db_per_band", c.tilt_db_per_band);
  c.partner_shift_bands = j.value("partner_shift_bands", c.partner_shift_bands);
  c.min_template_distance_db = j.value("min_template_distance_db", c.min_template_distance_db);
  c.frame_jitter_db = j.value("frame_jitter_db", c.frame_jitter_db);
  return c;
}

namespace {

Eigen::VectorXd render(const std::vector<Formant>& fs, double tilt, double warp) {
  Eigen::VectorXd v(kMelBands);
  for (int m = 0; m < kMelBands; ++m) {
    double db = tilt * m;
    for (const Formant& f : fs) {
      const double d = (m - f.center - warp) / f.width;
      db += f.height_db * std::exp(-0.5 * d * d);
    }
    v(m) = db;
  }
  return v;
}

}  // namespace

PhonemeModel::PhonemeModel(PhonemeConfig config) : config_(config) {
  if (config_.min_frames < 1 || config_.max_frames < config_.min_frames) {
    throw ConfigError("phoneme durations must satisfy 1 <= min <= max");
  }
  Rng rng(config_.seed);
  std::uniform_real_distribution<double> center(2.0, kMelBands - 3.0);
  std::uniform_real_distribution<double> height(config_.formant_db_min, config_.formant_db_max);
  std::uniform_real_distribution<double> width(1.2, 2.5);
  std::uniform_int_distribution<int> count(config_.formants_min, config_.formants_max);

  formants_.assign(kNumPhonemes + 1, {});
  partner_.assign(kNumPhonemes + 1, -1);
  const auto& kw = keyword_phonemes();

  auto distinct = [&](const std::vector<Formant>& cand, int upto) {
    const Eigen::VectorXd v = render(cand, 0, 0);
    for (int q = 1; q < upto; ++q) {
      if (formants_[static_cast<std::size_t>(q)].empty()) continue;
      if ((render(formants_[static_cast<std::size_t>(q)], 0, 0) - v).norm() < config_.min_template_distance_db) {
        return false;
      }
    }
    return true;
  };

  // Partners take the first filler ids so they are placed deterministically.
  std::vector<int> order;
  for (int p = 1; p <= kNumPhonemes; ++p) order.push_back(p);
  int next_partner = kFirstFiller;
  for (int k : kw) partner_[static_cast<std::size_t>(k)] = next_partner++;

  for (int p : order) {
    bool is_partner = false;
    for (int k : kw) is_partner = is_partner || partner_[static_cast<std::size_t>(k)] == p;
    if (is_partner) continue;
    std::vector<Formant> fs;
    for (int attempt = 0; attempt < 2000; ++attempt) {
      fs.clear();
      const int n = count(rng);
      for (int i = 0; i < n; ++i) fs.push_back({center(rng), height(rng), width(rng)});
      if (distinct(fs, p)) break;
    }
    formants_[static_cast<std::size_t>(p)] = fs;
    const int partner = partner_[static_cast<std::size_t>(p)];
    if (partner > 0) {
      // Move the strongest formant; everything else stays identical.
      std::vector<Formant> pf = fs;
      std::size_t strongest = 0;
      for (std::size_t i = 1; i < pf.size(); ++i) {
        if (pf[i].height_db > pf[strongest].height_db) strongest = i;
      }
      double c = pf[strongest].center;
      const double up = c + config_.partner_shift_bands;
      const double down = c - config_.partner_shift_bands;
      c = (up <= kMelBands - 3.0 && (down < 2.0 || std::bernoulli_distribution(0.5)(rng))) ? up : down;
      pf[strongest].center = c;
      formants_[static_cast<std::size_t>(partner)] = pf;
    }
  }
}

Eigen::VectorXd PhonemeModel::prototype(int p) const {
  if (p < 1 || p > kNumPhonemes) throw LabelError("prototype: phoneme id out of range");
  Eigen::VectorXd v = render(formants_[static_cast<std::size_t>(p)], config_.tilt_db_per_band, 0.0);
  return v.array() - v.minCoeff();
}

Eigen::VectorXd PhonemeModel::template_db(int p, const SpeakerStyle& style) const {
  if (p < 1 || p > kNumPhonemes) throw LabelError("template: phoneme id out of range");
  return render(formants_[static_cast<std::size_t>(p)], config_.tilt_db_per_band + style.tilt_db, style.warp_bands);
}

int PhonemeModel::partner(int keyword_phoneme) const {
  if (keyword_phoneme < 1 || keyword_phoneme > kNumPhonemes) throw LabelError("partner: phoneme id out of range");
  return partner_[static_cast<std::size_t>(keyword_phoneme)];
}

}  // namespace vtmc
