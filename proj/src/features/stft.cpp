// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/features/stft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace vtmc {

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

Matrix Spectrogram::power() const {
  Matrix p(frames, bins);
  for (Index t = 0; t < frames; ++t) {
    for (Index k = 0; k < bins; ++k) p(t, k) = std::norm(at(t, k));
  }
  return p;
}

RealFft::RealFft(int n) : n_(n) {
  in_ = fftw_alloc_real(static_cast<std::size_t>(n));
  out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  plan_ = fftw_plan_dft_r2c_1d(n, in_, static_cast<fftw_complex*>(out_), FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  fftw_free(in_);
  fftw_free(out_);
}

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::memcpy(in_, in, sizeof(double) * static_cast<std::size_t>(n_));
  fftw_execute(static_cast<fftw_plan>(plan_));
  std::memcpy(static_cast<void*>(out), out_, sizeof(fftw_complex) * static_cast<std::size_t>(n_ / 2 + 1));
}

RealIfft::RealIfft(int n) : n_(n) {
  in_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  out_ = fftw_alloc_real(static_cast<std::size_t>(n));
  plan_ = fftw_plan_dft_c2r_1d(n, static_cast<fftw_complex*>(in_), out_, FFTW_ESTIMATE);
}

RealIfft::~RealIfft() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  fftw_free(in_);
  fftw_free(out_);
}

void RealIfft::inverse(const std::complex<double>* in, double* out) {
  // c2r destroys its input, so always copy in.
  std::memcpy(in_, static_cast<const void*>(in), sizeof(fftw_complex) * static_cast<std::size_t>(n_ / 2 + 1));
  fftw_execute(static_cast<fftw_plan>(plan_));
  std::memcpy(out, out_, sizeof(double) * static_cast<std::size_t>(n_));
}

Spectrogram stft(const AudioClip& clip, int win, int hop) {
  if (win <= 0 || hop <= 0 || win < hop) throw ConfigError("stft: need win >= hop > 0");
  const auto len = static_cast<Index>(clip.samples.size());
  if (len < win) throw EmptyInputError("stft: clip shorter than one window");
  Spectrogram s;
  s.fft_size = win;
  s.frames = 1 + (len - win) / hop;
  s.bins = win / 2 + 1;
  s.data.resize(static_cast<std::size_t>(s.frames * s.bins));
  const std::vector<double> w = hann_window(win);
  std::vector<double> frame(static_cast<std::size_t>(win));
  RealFft fft(win);
  for (Index t = 0; t < s.frames; ++t) {
    const double* x = clip.samples.data() + t * hop;
    for (int n = 0; n < win; ++n) frame[static_cast<std::size_t>(n)] = x[n] * w[static_cast<std::size_t>(n)];
    fft.forward(frame.data(), &s.at(t, 0));
  }
  return s;
}

std::vector<double> istft(const Spectrogram& spec, int hop) {
  const int n = spec.fft_size;
  if (n <= 0 || hop <= 0 || hop > n) throw ConfigError("istft: need fft_size >= hop > 0");
  if (spec.frames == 0) return {};
  const auto len = static_cast<std::size_t>((spec.frames - 1) * hop + n);
  std::vector<double> out(len, 0.0), norm(len, 0.0), frame(static_cast<std::size_t>(n));
  const std::vector<double> w = hann_window(n);
  RealIfft ifft(n);
  for (Index t = 0; t < spec.frames; ++t) {
    ifft.inverse(&spec.at(t, 0), frame.data());
    const auto off = static_cast<std::size_t>(t * hop);
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      out[off + k] += w[k] * frame[k] / n;
      norm[off + k] += w[k] * w[k];
    }
  }
  // The first sample of a periodic Hann window is zero, so the edges have
  // little support; a floor keeps them bounded.
  for (std::size_t i = 0; i < len; ++i) out[i] /= std::max(norm[i], 1e-2);
  return out;
}

}  // namespace vtmc
