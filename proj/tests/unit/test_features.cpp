// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "vtmc/features/extractor.hpp"

using namespace vtmc;

namespace {

AudioClip tone(double hz, double seconds, double amp = 0.5) {
  AudioClip c;
  const auto n = static_cast<std::size_t>(seconds * kSampleRate);
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / kSampleRate);
  return c;
}

AudioClip noise(double seconds, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d(0, 0.1);
  AudioClip c;
  c.samples.resize(static_cast<std::size_t>(seconds * kSampleRate));
  for (auto& s : c.samples) s = d(rng);
  return c;
}

// O(N^2) DFT of one windowed frame.
std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
  const auto n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * std::polar(1.0, -2 * std::numbers::pi * k * i / n);
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("stft frame count and errors") {
  const AudioClip c = noise(1.0, 1);
  const Spectrogram s = stft(c, 400, 160);
  CHECK(s.frames == 1 + (16000 - 400) / 160);
  CHECK(s.bins == 201);
  AudioClip tiny;
  tiny.samples.assign(399, 0.0);
  CHECK_THROWS_AS(stft(tiny, 400, 160), EmptyInputError);
  CHECK_THROWS_AS(stft(c, 100, 160), ConfigError);
}

TEST_CASE("stft matches a direct DFT and peaks at a 1 kHz tone") {
  const AudioClip c = tone(1000.0, 0.2);
  const Spectrogram s = stft(c, 400, 160);
  const auto w = hann_window(400);
  for (Index t : {Index{0}, s.frames / 2, s.frames - 1}) {
    std::vector<double> frame(400);
    for (int i = 0; i < 400; ++i) frame[i] = c.samples[static_cast<std::size_t>(t * 160 + i)] * w[i];
    const auto ref = direct_dft(frame);
    double err = 0;
    for (Index k = 0; k < s.bins; ++k) err = std::max(err, std::abs(ref[k] - s.at(t, k)));
    CHECK(err < 1e-9);
  }
  const Matrix p = s.power();
  const Index expect = std::lround(1000.0 * 400 / kSampleRate);
  for (Index t = 0; t < s.frames; ++t) {
    Index arg;
    p.row(t).maxCoeff(&arg);
    CHECK(arg == expect);
  }
}

TEST_CASE("stft of silence is zero") {
  AudioClip c;
  c.samples.assign(3200, 0.0);
  CHECK(stft(c, 400, 160).power().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft satisfies Parseval per frame") {
  const AudioClip c = noise(0.3, 2);
  const Spectrogram s = stft(c, 400, 160);
  const Matrix p = s.power();
  const auto w = hann_window(400);
  for (Index t = 0; t < s.frames; ++t) {
    double time_energy = 0;
    for (int i = 0; i < 400; ++i) {
      const double v = c.samples[static_cast<std::size_t>(t * 160 + i)] * w[i];
      time_energy += v * v;
    }
    double spec = p(t, 0) + p(t, 200);
    for (Index k = 1; k < 200; ++k) spec += 2 * p(t, k);
    spec /= 400;
    CHECK(std::abs(spec - time_energy) / time_energy < 1e-6);
  }
}

TEST_CASE("logmel of white noise is roughly flat") {
  const AudioClip c = noise(1.1, 3);
  const Spectrogram s = stft(c, 400, 160);
  const Matrix mel = logmel(s, 40, 60, 7600);
  REQUIRE(mel.rows() >= 100);
  const Eigen::RowVectorXd avg = mel.topRows(100).colwise().mean();
  const auto inner = avg.segment(2, 36);
  const double range_db = 10.0 / std::log(10.0) * (inner.maxCoeff() - inner.minCoeff());
  CHECK(range_db < 6.0);
}

TEST_CASE("logmel of silence equals the floor") {
  AudioClip c;
  c.samples.assign(4000, 0.0);
  const Matrix mel = logmel(stft(c, 400, 160), 40, 60, 7600);
  CHECK((mel.array() - std::log(1e-10)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("a tone at a filter center wins that filter") {
  const MelFilterbank bank(40, 400, kSampleRate, 60, 7600);
  for (int k : {4, 10, 17, 25, 33, 38}) {
    CAPTURE(k);
    const Matrix mel = logmel(stft(tone(bank.center_hz(k), 0.1), 400, 160), bank);
    Index arg;
    mel.row(mel.rows() / 2).maxCoeff(&arg);
    CHECK(arg == k);
  }
}

TEST_CASE("logmel configuration errors") {
  AudioClip c;
  c.samples.assign(800, 0.0);
  const Spectrogram s = stft(c, 400, 160);
  CHECK_THROWS_AS(logmel(s, 40, 60, 9000), ConfigError);
  CHECK_THROWS_AS(logmel(s, 32, 60, 7600), ConfigError);
}

TEST_CASE("stack_context layout") {
  Matrix ramp(6, 40);
  for (Index t = 0; t < 6; ++t) ramp.row(t).setConstant(static_cast<double>(t));
  const Matrix st = stack_context(ramp);
  REQUIRE(st.cols() == 280);
  REQUIRE(st.rows() == 6);
  CHECK((st.row(3).segment(120, 40) - ramp.row(3)).cwiseAbs().maxCoeff() == 0.0);
  for (int j = 0; j < 7; ++j) CHECK(st(3, 40 * j) == std::clamp(3 + j - 3, 0, 5));
  CHECK(st(0, 0) == 0.0);
  CHECK(st(5, 279) == 5.0);

  Matrix one = Matrix::Constant(1, 40, 2.5);
  one(0, 7) = -1;
  const Matrix s1 = stack_context(one);
  for (int j = 0; j < 7; ++j) CHECK((s1.block(0, 40 * j, 1, 40) - one).cwiseAbs().maxCoeff() == 0.0);

  const Matrix cst = stack_context(Matrix::Constant(4, 40, 1.25));
  CHECK((cst.array() - 1.25).abs().maxCoeff() == 0.0);
}

TEST_CASE("features are 280 wide, finite and shift covariant") {
  FeatureExtractor fx;
  const AudioClip c = noise(0.5, 4);
  AudioClip d;
  d.samples.assign(160, 0.0);
  d.samples.insert(d.samples.end(), c.samples.begin(), c.samples.end());
  const Matrix a = fx.logmel(c);
  const Matrix b = fx.logmel(d);
  CHECK(b.rows() == a.rows() + 1);
  CHECK((b.bottomRows(a.rows()) - a).cwiseAbs().maxCoeff() < 1e-9);

  const FeatureSequence f = fx.features(c);
  CHECK(f.frames.cols() == 280);
  CHECK(f.frames.allFinite());
  CHECK(f.frame_shift == doctest::Approx(0.01));
  AudioClip z;
  z.samples.assign(1600, 0.0);
  CHECK(fx.features(z).frames.allFinite());
}

TEST_CASE("normalizer gives zero mean and unit variance and round trips") {
  FeatureExtractor fx;
  FeatureNormalizer norm;
  const Matrix m1 = fx.logmel(noise(0.5, 5));
  const Matrix m2 = fx.logmel(tone(440, 0.5));
  norm.accumulate(m1);
  norm.accumulate(m2);
  norm.finalize();
  Matrix all(m1.rows() + m2.rows(), 40);
  all << m1, m2;
  norm.apply(all);
  CHECK(all.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  const FeatureNormalizer back = FeatureNormalizer::from_json(norm.to_json());
  CHECK(back.mean() == norm.mean());
  CHECK(back.inv_std() == norm.inv_std());
}

TEST_CASE("feature config round trips") {
  FeatureConfig c;
  c.fmin = 80;
  const FeatureConfig b = FeatureConfig::from_json(c.to_json());
  CHECK(b.fmin == 80);
  CHECK(b.win == 400);
  CHECK(b.feature_dim() == 280);
}

TEST_CASE("wav round trip at 16 bit precision") {
  const auto path = std::filesystem::temp_directory_path() / "vtmc_wav_test.wav";
  const AudioClip c = tone(300, 0.25);
  write_wav(path, c);
  const AudioClip r = read_wav(path);
  REQUIRE(r.samples.size() == c.samples.size());
  double err = 0;
  for (std::size_t i = 0; i < c.samples.size(); ++i) err = std::max(err, std::abs(r.samples[i] - c.samples[i]));
  CHECK(err <= 1.0 / 32768 + 1e-12);
  CHECK(wav_duration(path) == doctest::Approx(0.25));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_wav(path), IoError);
}

TEST_CASE("istft inverts stft away from the edges") {
  const AudioClip c = noise(0.2, 6);
  const Spectrogram s = stft(c, 400, 160);
  const std::vector<double> y = istft(s, 160);
  REQUIRE(y.size() == static_cast<std::size_t>((s.frames - 1) * 160 + 400));
  double err = 0;
  for (std::size_t i = 400; i + 400 < y.size(); ++i) err = std::max(err, std::abs(y[i] - c.samples[i]));
  CHECK(err < 1e-12);
}
