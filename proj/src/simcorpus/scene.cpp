// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/simcorpus/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "vtmc/features/stft.hpp"

namespace vtmc {

namespace {

constexpr int kWin = 400;
constexpr int kHop = 160;
constexpr int kBins = kWin / 2 + 1;
constexpr double kFmin = 60.0;
constexpr double kFmax = 7600.0;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

using CMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

std::string condition_name(Condition c) {
  switch (c) {
    case Condition::Quiet: return "quiet";
    case Condition::Noisy: return "noisy";
    case Condition::MediumPlayback: return "medium_playback";
    case Condition::LoudPlayback: return "loud_playback";
  }
  return "unknown";
}

Condition parse_condition(const std::string& name) {
  for (Condition c : all_conditions()) {
    if (condition_name(c) == name) return c;
  }
  throw ConfigError("unknown condition '" + name + "'");
}

const std::array<Condition, kNumConditions>& all_conditions() {
  static const std::array<Condition, kNumConditions> all{Condition::Quiet, Condition::Noisy,
                                                         Condition::MediumPlayback, Condition::LoudPlayback};
  return all;
}

#define VTMC_FIELDS(X)                                                                                        \
  X(target_rms) X(floor_snr_db) X(noisy_snr_min_db) X(noisy_snr_max_db) X(interference_prob) X(sir_min_db)    \
  X(sir_max_db) X(medium_music_snr_db) X(loud_music_snr_db) X(distortion_prob_quiet) X(distortion_prob_other) \
  X(notch_min) X(notch_max) X(notch_width_min_bins) X(notch_width_max_bins) X(notch_gain)                     \
  X(enhanced_noise_gain) X(enhanced_interference_gain) X(enhanced_music_gain) X(fragment_main_prob)           \
  X(fragment_frames) X(fragment_bins) X(fragment_leak_gain) X(separation_leak_gain) X(lead_min_frames)        \
  X(lead_max_frames) X(tail_min_frames) X(tail_max_frames) X(prefix_prob) X(suffix_prob) X(phrase_min)        \
  X(phrase_max) X(near_miss_prob) X(warp_max_bands) X(tilt_max_db) X(rate_min) X(rate_max)                    \
  X(stream_gap_min_frames) X(stream_gap_max_frames)

nlohmann::json SceneConfig::to_json() const {
  nlohmann::json j;
#define X(f) j[#f] = f;
  VTMC_FIELDS(X)
#undef X
  return j;
}

SceneConfig SceneConfig::from_json(const nlohmann::json& j) {
  SceneConfig c;
#define X(f) c.f = j.value(#f, c.f);
  VTMC_FIELDS(X)
#undef X
  return c;
}
#undef VTMC_FIELDS

std::array<SeparatedRole, 3> SceneSpec::roles() const {
  std::array<int, 3> order{0, 1, 2};
  Rng rng(perm_seed);
  for (int i = 2; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return {static_cast<SeparatedRole>(order[0]), static_cast<SeparatedRole>(order[1]),
          static_cast<SeparatedRole>(order[2])};
}

void SceneSpec::validate() const {
  if (!std::isfinite(snr_db) || !std::isfinite(sir_db) || !std::isfinite(music_snr_db)) {
    throw ConfigError("scene: SNR values must be finite");
  }
  if (keyword && near_miss) throw ConfigError("scene: a keyword scene cannot be a near miss");
}

nlohmann::json SceneSpec::to_json() const {
  return {{"condition", condition_name(condition)},
          {"keyword", keyword},
          {"near_miss", near_miss},
          {"interference", interference},
          {"distortion", distortion},
          {"snr_db", snr_db},
          {"sir_db", sir_db},
          {"music_snr_db", music_snr_db},
          {"perm_seed", perm_seed}};
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
  SceneSpec s;
  s.condition = parse_condition(j.at("condition").get<std::string>());
  s.keyword = j.value("keyword", false);
  s.near_miss = j.value("near_miss", false);
  s.interference = j.value("interference", false);
  s.distortion = j.value("distortion", false);
  s.snr_db = j.value("snr_db", s.snr_db);
  s.sir_db = j.value("sir_db", s.sir_db);
  s.music_snr_db = j.value("music_snr_db", s.music_snr_db);
  s.perm_seed = j.value("perm_seed", s.perm_seed);
  return s;
}

SceneSpec draw_scene(Condition condition, bool keyword, Rng& rng, const SceneConfig& cfg) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SceneSpec s;
  s.condition = condition;
  s.keyword = keyword;
  s.near_miss = !keyword && u01(rng) < cfg.near_miss_prob;
  s.snr_db = cfg.floor_snr_db;
  switch (condition) {
    case Condition::Quiet:
      break;
    case Condition::Noisy:
      s.snr_db = cfg.noisy_snr_min_db + (cfg.noisy_snr_max_db - cfg.noisy_snr_min_db) * u01(rng);
      s.interference = u01(rng) < cfg.interference_prob;
      s.sir_db = cfg.sir_min_db + (cfg.sir_max_db - cfg.sir_min_db) * u01(rng);
      break;
    case Condition::MediumPlayback:
      s.music_snr_db = cfg.medium_music_snr_db;
      break;
    case Condition::LoudPlayback:
      s.music_snr_db = cfg.loud_music_snr_db;
      break;
  }
  const double pd = condition == Condition::Quiet ? cfg.distortion_prob_quiet : cfg.distortion_prob_other;
  s.distortion = u01(rng) < pd;
  s.perm_seed = rng();
  return s;
}

int UtteranceRecord::target_channel() const {
  const auto r = spec.roles();
  for (int j = 0; j < 3; ++j) {
    if (r[static_cast<std::size_t>(j)] == SeparatedRole::Target) return j + 1;
  }
  return 1;
}

std::vector<int> random_phrase(int length, Rng& rng) {
  std::uniform_int_distribution<int> ph(1, kNumPhonemes);
  std::vector<int> p;
  do {
    p.assign(static_cast<std::size_t>(length), 0);
    for (int& v : p) v = ph(rng);
  } while (contains_keyword(p));
  return p;
}

std::vector<int> near_miss_phrase(const PhonemeModel& phonemes, Rng& rng) {
  const auto& kw = keyword_phonemes();
  std::vector<int> p = kw;
  if (std::bernoulli_distribution(0.7)(rng)) {
    const auto i = std::uniform_int_distribution<std::size_t>(0, kw.size() - 1)(rng);
    p[i] = phonemes.partner(kw[i]);
  } else {
    p.resize(std::uniform_int_distribution<std::size_t>(3, kw.size() - 1)(rng));
  }
  return p;
}

namespace {

// ---------------------------------------------------------------------------
// spectral helpers

struct BinMap {
  std::array<int, kBins> lo{};
  std::array<double, kBins> frac{};
  std::array<double, kBins> edge_db{};
  std::array<double, kBins> weight{};  // one-sided energy weights
};

const BinMap& bin_map() {
  static const BinMap m = [] {
    BinMap b;
    const double lo = hz_to_mel(kFmin);
    const double hi = hz_to_mel(kFmax);
    for (int k = 0; k < kBins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / kWin;
      const double u = (hz_to_mel(f) - lo) / (hi - lo) * (kMelBands + 1) - 1.0;
      const double uc = std::clamp(u, 0.0, kMelBands - 1.0);
      b.lo[static_cast<std::size_t>(k)] = std::min(static_cast<int>(std::floor(uc)), kMelBands - 2);
      b.frac[static_cast<std::size_t>(k)] = uc - b.lo[static_cast<std::size_t>(k)];
      b.edge_db[static_cast<std::size_t>(k)] = (f < kFmin || f > kFmax) ? -30.0 : 0.0;
      b.weight[static_cast<std::size_t>(k)] = (k == 0 || k == kBins - 1) ? 1.0 : 2.0;
    }
    return b;
  }();
  return m;
}

// Mel-domain dB row -> per-bin power.
void mel_db_to_power(const double* env, double* power) {
  const BinMap& m = bin_map();
  for (int k = 0; k < kBins; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double db = env[m.lo[i]] * (1 - m.frac[i]) + env[m.lo[i] + 1] * m.frac[i] + m.edge_db[i];
    power[k] = std::pow(10.0, db / 10.0);
  }
}

double frame_energy(const CMatrix& x, Index t) {
  const BinMap& m = bin_map();
  double e = 0;
  for (int k = 0; k < kBins; ++k) e += m.weight[static_cast<std::size_t>(k)] * std::norm(x(t, k));
  return e;
}

// Gaussian spectrum with the given per-bin power (zero rows stay silent).
CMatrix random_spectrum(const Matrix& power, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix x(power.rows(), power.cols());
  for (Index t = 0; t < power.rows(); ++t) {
    for (Index k = 0; k < power.cols(); ++k) {
      const double a = std::sqrt(power(t, k) / 2.0);
      const double re = g(rng);
      const double im = g(rng);
      x(t, k) = a == 0.0 ? std::complex<double>(0, 0) : std::complex<double>(a * re, a * im);
    }
  }
  return x;
}

// Mean frame energy over frames where `active` is set (all frames if null).
double mean_energy(const CMatrix& x, const std::vector<char>* active) {
  double e = 0;
  Index n = 0;
  for (Index t = 0; t < x.rows(); ++t) {
    if (active && !(*active)[static_cast<std::size_t>(t)]) continue;
    e += frame_energy(x, t);
    ++n;
  }
  return n > 0 ? e / static_cast<double>(n) : 0.0;
}

void scale_energy(CMatrix& x, double target, const std::vector<char>* active) {
  const double e = mean_energy(x, active);
  if (e > 0) x *= std::sqrt(target / e);
}

double energy_for_rms(double rms) {
  // E sum_k |X_k|^2 = N * sum(w^2) * sigma^2 for a white signal; sum(w^2) = 3N/8 for Hann.
  return static_cast<double>(kWin) * (3.0 * kWin / 8.0) * rms * rms;
}

AudioClip to_audio(const CMatrix& x) {
  Spectrogram s;
  s.frames = x.rows();
  s.bins = kBins;
  s.fft_size = kWin;
  s.data.assign(x.data(), x.data() + x.size());
  AudioClip clip;
  clip.samples = istft(s, kHop);
  quantize_pcm16(clip);
  return clip;
}

// ---------------------------------------------------------------------------
// speech tracks

struct Track {
  Matrix env;                // frames x 40 dB, NaN rows are silent
  std::vector<int> phones;   // per frame
  std::vector<int> transcript;

  explicit Track(Index frames) : env(Matrix::Constant(frames, kMelBands, kNaN)), phones(static_cast<std::size_t>(frames), 0) {}
  Index frames() const { return env.rows(); }
};

SpeakerStyle draw_speaker(Rng& rng, const SceneConfig& cfg) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SpeakerStyle s;
  s.warp_bands = cfg.warp_max_bands * u(rng);
  s.tilt_db = cfg.tilt_max_db * u(rng);
  s.rate = std::uniform_real_distribution<double>(cfg.rate_min, cfg.rate_max)(rng);
  return s;
}

std::vector<int> draw_durations(const std::vector<int>& phrase, const SpeakerStyle& style, Rng& rng,
                                const PhonemeModel& pm) {
  std::uniform_int_distribution<int> d(pm.config().min_frames, pm.config().max_frames);
  std::vector<int> out;
  for (std::size_t i = 0; i < phrase.size(); ++i) out.push_back(std::max(1, static_cast<int>(std::lround(d(rng) * style.rate))));
  return out;
}

// Writes the phrase starting at `start`; returns one past its last frame.
Index place_phrase(Track& tr, Index start, const std::vector<int>& phrase, const std::vector<int>& durs,
                   const SpeakerStyle& style, Rng& rng, const PhonemeModel& pm) {
  std::normal_distribution<double> jitter(0.0, pm.config().frame_jitter_db);
  Index t = start;
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    const Eigen::VectorXd base = pm.template_db(phrase[i], style);
    for (int k = 0; k < durs[i] && t < tr.frames(); ++k, ++t) {
      for (int m = 0; m < kMelBands; ++m) tr.env(t, m) = base(m) + jitter(rng);
      tr.phones[static_cast<std::size_t>(t)] = phrase[i];
    }
  }
  tr.transcript.insert(tr.transcript.end(), phrase.begin(), phrase.end());
  return t;
}

Index phrase_frames(const std::vector<int>& durs) { return std::accumulate(durs.begin(), durs.end(), Index{0}); }

Matrix track_power(const Track& tr) {
  Matrix p = Matrix::Zero(tr.frames(), kBins);
  for (Index t = 0; t < tr.frames(); ++t) {
    if (std::isnan(tr.env(t, 0))) continue;
    mel_db_to_power(&tr.env(t, 0), &p(t, 0));
  }
  return p;
}

std::vector<char> active_frames(const Track& tr) {
  std::vector<char> a(static_cast<std::size_t>(tr.frames()), 0);
  for (Index t = 0; t < tr.frames(); ++t) a[static_cast<std::size_t>(t)] = !std::isnan(tr.env(t, 0));
  return a;
}

// Fills a track with back-to-back random phrases (interfering talker).
Track interference_track(Index frames, Rng& rng, const PhonemeModel& pm, const SceneConfig& cfg) {
  Track tr(frames);
  const SpeakerStyle style = draw_speaker(rng, cfg);
  Index t = std::uniform_int_distribution<Index>(0, 20)(rng);
  while (t < frames) {
    const auto phrase = random_phrase(std::uniform_int_distribution<int>(cfg.phrase_min, cfg.phrase_max)(rng), rng);
    t = place_phrase(tr, t, phrase, draw_durations(phrase, style, rng, pm), style, rng, pm);
    t += std::uniform_int_distribution<Index>(5, 30)(rng);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// non-speech sources

CMatrix noise_spectrum(Index frames, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd shape(kMelBands);
  const double slope = -0.5 * u(rng);
  const double c1 = 40 * u(rng), c2 = 40 * u(rng);
  for (int m = 0; m < kMelBands; ++m) {
    shape(m) = slope * m + 6 * std::exp(-0.5 * std::pow((m - c1) / 4.0, 2)) + 6 * std::exp(-0.5 * std::pow((m - c2) / 4.0, 2));
  }
  Matrix p(frames, kBins);
  std::normal_distribution<double> step(0.0, 0.4);
  double gain_db = 0;
  for (Index t = 0; t < frames; ++t) {
    gain_db = std::clamp(0.97 * gain_db + step(rng), -6.0, 6.0);
    Eigen::VectorXd row = shape.array() + gain_db;
    mel_db_to_power(row.data(), &p(t, 0));
  }
  return random_spectrum(p, rng);
}

double hann_kernel(double d) {
  const auto sinc = [](double x) { return std::abs(x) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x); };
  return 0.5 * sinc(d) + 0.25 * sinc(d - 1) + 0.25 * sinc(d + 1);
}

// Three gliding harmonic voices with note changes, rendered as STFT frames.
CMatrix music_spectrum(Index frames, Rng& rng) {
  CMatrix x = CMatrix::Zero(frames, kBins);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int voice = 0; voice < 3; ++voice) {
    Index t = 0;
    std::vector<double> phase(8, 0.0);
    while (t < frames) {
      const Index dur = std::uniform_int_distribution<Index>(15, 60)(rng);
      const double f0 = 110.0 * std::pow(2.0, 3.0 * u(rng));
      const double glide = 0.6 * (u(rng) - 0.5);
      for (Index k = 0; k < dur && t < frames; ++k, ++t) {
        const double pos = static_cast<double>(k) / static_cast<double>(dur);
        const double f = f0 * std::pow(2.0, glide * pos);
        const double env = std::exp(-1.5 * pos) * std::min(1.0, 4.0 * pos + 0.2);
        for (int h = 1; h <= 8; ++h) {
          const double fh = f * h;
          if (fh > kFmax) break;
          auto& ph = phase[static_cast<std::size_t>(h - 1)];
          ph = std::fmod(ph + 2 * std::numbers::pi * fh * kHop / kSampleRate, 2 * std::numbers::pi);
          const double b = fh * kWin / kSampleRate;
          const double amp = env / h * kWin / 2.0;
          for (int bin = static_cast<int>(std::floor(b)) - 2; bin <= static_cast<int>(std::floor(b)) + 3; ++bin) {
            if (bin < 0 || bin >= kBins) continue;
            x(t, bin) += std::polar(amp * hann_kernel(bin - b), ph);
          }
        }
      }
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// front-end emulation

struct Sources {
  CMatrix target;
  CMatrix noise;
  CMatrix interference;  // empty when absent
  CMatrix music;         // empty when absent
};

// Per-frame notch gains for the enhanced channel; rows of ones where undistorted.
void add_notches(Matrix& gains, Index t0, Index t1, Rng& rng, const SceneConfig& cfg) {
  const int n = std::uniform_int_distribution<int>(cfg.notch_min, cfg.notch_max)(rng);
  Eigen::RowVectorXd g = Eigen::RowVectorXd::Ones(kBins);
  for (int i = 0; i < n; ++i) {
    const int w = std::uniform_int_distribution<int>(cfg.notch_width_min_bins, cfg.notch_width_max_bins)(rng);
    const int c = std::uniform_int_distribution<int>(2, kBins - 10)(rng);
    for (int k = std::max(0, c - w / 2); k < std::min(kBins, c + (w + 1) / 2); ++k) g(k) = cfg.notch_gain;
  }
  for (Index t = std::max<Index>(t0, 0); t < std::min(t1, gains.rows()); ++t) gains.row(t) = g;
}

// owner(t, k) in {0,1,2}: which separated role carries the target in that tile.
std::vector<std::uint8_t> fragment_owners(Index frames, Rng& rng, const SceneConfig& cfg) {
  const Index tf = std::max(1, cfg.fragment_frames);
  const int bf = std::max(1, cfg.fragment_bins);
  const Index t_off = std::uniform_int_distribution<Index>(0, tf - 1)(rng);
  const int k_off = std::uniform_int_distribution<int>(0, bf - 1)(rng);
  const Index nt = (frames + t_off) / tf + 1;
  const int nk = (kBins + k_off) / bf + 1;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> tile(static_cast<std::size_t>(nt * nk));
  for (auto& o : tile) {
    const double r = u(rng);
    o = r < cfg.fragment_main_prob ? 0 : (r < cfg.fragment_main_prob + (1 - cfg.fragment_main_prob) / 2 ? 1 : 2);
  }
  std::vector<std::uint8_t> owner(static_cast<std::size_t>(frames * kBins));
  for (Index t = 0; t < frames; ++t) {
    for (int k = 0; k < kBins; ++k) {
      owner[static_cast<std::size_t>(t * kBins + k)] = tile[static_cast<std::size_t>(((t + t_off) / tf) * nk + (k + k_off) / bf)];
    }
  }
  return owner;
}

std::array<AudioClip, kNumChannels> front_end(const Sources& s, const Matrix& notch, const std::array<SeparatedRole, 3>& roles,
                                              const std::vector<std::uint8_t>& owner, const SceneConfig& cfg) {
  const Index frames = s.target.rows();
  const bool has_i = s.interference.size() > 0;
  const bool has_m = s.music.size() > 0;
  std::array<AudioClip, kNumChannels> out;

  CMatrix ch = s.target.cwiseProduct(notch.cast<std::complex<double>>()) + cfg.enhanced_noise_gain * s.noise;
  if (has_i) ch += cfg.enhanced_interference_gain * s.interference;
  if (has_m) ch += cfg.enhanced_music_gain * s.music;
  out[0] = to_audio(ch);

  const double leak = cfg.separation_leak_gain;
  for (int j = 0; j < 3; ++j) {
    const SeparatedRole role = roles[static_cast<std::size_t>(j)];
    const auto own = static_cast<std::uint8_t>(role);
    ch = CMatrix(frames, kBins);
    for (Index t = 0; t < frames; ++t) {
      for (int k = 0; k < kBins; ++k) {
        const double g = owner[static_cast<std::size_t>(t * kBins + k)] == own ? 1.0 : cfg.fragment_leak_gain;
        ch(t, k) = g * s.target(t, k);
      }
    }
    switch (role) {
      case SeparatedRole::Target:
        ch += leak * s.noise;
        if (has_i) ch += leak * s.interference;
        if (has_m) ch += leak * s.music;
        break;
      case SeparatedRole::Interference:
        ch += leak * s.noise;
        if (has_i) ch += s.interference;
        if (has_m) ch += s.music;
        break;
      case SeparatedRole::Noise:
        ch += s.noise;
        if (has_i) ch += leak * s.interference;
        if (has_m) ch += leak * s.music;
        break;
    }
    out[static_cast<std::size_t>(j + 1)] = to_audio(ch);
  }
  return out;
}

void scale_sources(Sources& s, const std::vector<char>& active, double snr_db, double sir_db, double music_snr_db,
                   const SceneConfig& cfg) {
  const double e_target = energy_for_rms(cfg.target_rms);
  scale_energy(s.target, e_target, &active);
  scale_energy(s.noise, e_target / std::pow(10.0, snr_db / 10.0), nullptr);
  if (s.interference.size() > 0) scale_energy(s.interference, e_target / std::pow(10.0, sir_db / 10.0), nullptr);
  if (s.music.size() > 0) scale_energy(s.music, e_target / std::pow(10.0, music_snr_db / 10.0), nullptr);
}

}  // namespace

UtteranceRecord synth_utterance(const SceneSpec& spec, std::uint64_t seed, const PhonemeModel& pm,
                                const SceneConfig& cfg) {
  spec.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const SpeakerStyle style = draw_speaker(rng, cfg);

  // Plan: lead, [prefix, gap], main phrase, [gap, suffix], tail.
  std::vector<int> prefix, suffix, main;
  if (spec.keyword) main = keyword_phonemes();
  else if (spec.near_miss) main = near_miss_phrase(pm, rng);
  else main = random_phrase(std::uniform_int_distribution<int>(cfg.phrase_min, cfg.phrase_max)(rng), rng);
  for (int attempt = 0;; ++attempt) {
    prefix.clear();
    suffix.clear();
    if (u01(rng) < cfg.prefix_prob) prefix = random_phrase(std::uniform_int_distribution<int>(1, 2)(rng), rng);
    if (u01(rng) < cfg.suffix_prob) suffix = random_phrase(std::uniform_int_distribution<int>(1, 4)(rng), rng);
    std::vector<int> all = prefix;
    all.insert(all.end(), main.begin(), main.end());
    all.insert(all.end(), suffix.begin(), suffix.end());
    if (contains_keyword(all) == spec.keyword) break;
    if (attempt > 100) throw StateError("synth_utterance: cannot build a keyword-free transcript");
  }
  const auto d_prefix = draw_durations(prefix, style, rng, pm);
  const auto d_main = draw_durations(main, style, rng, pm);
  const auto d_suffix = draw_durations(suffix, style, rng, pm);
  const Index lead = std::uniform_int_distribution<Index>(cfg.lead_min_frames, cfg.lead_max_frames)(rng);
  const Index gap1 = prefix.empty() ? 0 : std::uniform_int_distribution<Index>(3, 10)(rng);
  const Index gap2 = suffix.empty() ? 0 : std::uniform_int_distribution<Index>(3, 15)(rng);
  const Index tail = std::uniform_int_distribution<Index>(cfg.tail_min_frames, cfg.tail_max_frames)(rng);
  const Index frames = lead + phrase_frames(d_prefix) + gap1 + phrase_frames(d_main) + gap2 + phrase_frames(d_suffix) + tail;

  Track target(frames);
  Index t = lead;
  if (!prefix.empty()) t = place_phrase(target, t, prefix, d_prefix, style, rng, pm) + gap1;
  const Index main_start = t;
  t = place_phrase(target, t, main, d_main, style, rng, pm);
  const Index main_end = t - 1;
  if (!suffix.empty()) place_phrase(target, t + gap2, suffix, d_suffix, style, rng, pm);

  Sources src;
  src.target = random_spectrum(track_power(target), rng);
  src.noise = noise_spectrum(frames, rng);
  if (spec.interference) src.interference = random_spectrum(track_power(interference_track(frames, rng, pm, cfg)), rng);
  if (spec.condition == Condition::MediumPlayback || spec.condition == Condition::LoudPlayback) {
    src.music = music_spectrum(frames, rng);
  }
  const std::vector<char> active = active_frames(target);
  scale_sources(src, active, spec.snr_db, spec.sir_db, spec.music_snr_db, cfg);

  Matrix notch = Matrix::Ones(frames, kBins);
  if (spec.distortion) add_notches(notch, 0, frames, rng, cfg);
  const auto owner = fragment_owners(frames, rng, cfg);

  UtteranceRecord rec;
  rec.seed = seed;
  rec.spec = spec;
  rec.channels = front_end(src, notch, spec.roles(), owner, cfg);
  rec.clean_target = to_audio(src.target);
  rec.pseudo_sc = 0;
  rec.transcript = target.transcript;
  rec.frame_phones = target.phones;
  if (spec.keyword) {
    rec.keyword_start = main_start;
    rec.keyword_end = main_end;
  }
  return rec;
}

NegativeStream render_negative_stream(Condition condition, std::uint64_t seed, double seconds, const PhonemeModel& pm,
                                      const SceneConfig& cfg) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto frames = static_cast<Index>(std::floor((seconds * kSampleRate - kWin) / kHop)) + 1;
  if (frames < 1) throw ConfigError("negative stream shorter than one frame");
  const SceneSpec scene = draw_scene(condition, false, rng, cfg);

  NegativeStream out;
  out.condition = condition;
  Track target(frames);
  Track interf(frames);
  Matrix notch = Matrix::Ones(frames, kBins);
  bool any_interference = false;
  Index t = std::uniform_int_distribution<Index>(cfg.stream_gap_min_frames, cfg.stream_gap_max_frames)(rng);
  SpeakerStyle style = draw_speaker(rng, cfg);
  while (t < frames) {
    if (u01(rng) < 0.3) style = draw_speaker(rng, cfg);
    std::vector<int> phrase;
    if (u01(rng) < cfg.near_miss_prob) phrase = near_miss_phrase(pm, rng);
    else phrase = random_phrase(std::uniform_int_distribution<int>(cfg.phrase_min, cfg.phrase_max + 4)(rng), rng);
    // A keyword must not form across the phrase boundary either.
    std::vector<int> tail_check = out.phrases.empty() ? std::vector<int>{} : out.phrases.back();
    tail_check.insert(tail_check.end(), phrase.begin(), phrase.end());
    if (contains_keyword(tail_check)) continue;
    const auto durs = draw_durations(phrase, style, rng, pm);
    const Index start = t;
    t = place_phrase(target, t, phrase, durs, style, rng, pm);
    out.phrases.push_back(phrase);
    const double pd = condition == Condition::Quiet ? cfg.distortion_prob_quiet : cfg.distortion_prob_other;
    if (u01(rng) < pd) add_notches(notch, start, t, rng, cfg);
    if (condition == Condition::Noisy && u01(rng) < cfg.interference_prob) {
      // an interfering talker overlapping this phrase
      const SpeakerStyle other = draw_speaker(rng, cfg);
      const auto ip = random_phrase(std::uniform_int_distribution<int>(cfg.phrase_min, cfg.phrase_max)(rng), rng);
      const Index is = std::max<Index>(0, start - std::uniform_int_distribution<Index>(0, 20)(rng));
      place_phrase(interf, is, ip, draw_durations(ip, other, rng, pm), other, rng, pm);
      any_interference = true;
    }
    t += std::uniform_int_distribution<Index>(cfg.stream_gap_min_frames, cfg.stream_gap_max_frames)(rng);
  }

  Sources src;
  src.target = random_spectrum(track_power(target), rng);
  src.noise = noise_spectrum(frames, rng);
  if (any_interference) src.interference = random_spectrum(track_power(interf), rng);
  if (condition == Condition::MediumPlayback || condition == Condition::LoudPlayback) src.music = music_spectrum(frames, rng);
  const std::vector<char> active = active_frames(target);
  // Interference level is set against the talker's own active frames.
  const double e_target = energy_for_rms(cfg.target_rms);
  scale_energy(src.target, e_target, &active);
  scale_energy(src.noise, e_target / std::pow(10.0, scene.snr_db / 10.0), nullptr);
  if (any_interference) {
    const std::vector<char> ia = active_frames(interf);
    scale_energy(src.interference, e_target / std::pow(10.0, scene.sir_db / 10.0), &ia);
  }
  if (src.music.size() > 0) scale_energy(src.music, e_target / std::pow(10.0, scene.music_snr_db / 10.0), nullptr);

  const auto owner = fragment_owners(frames, rng, cfg);
  out.channels = front_end(src, notch, scene.roles(), owner, cfg);
  return out;
}

}  // namespace vtmc
