// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "vtmc/features/audio.hpp"
#include "vtmc/ndcore/matrix.hpp"

namespace vtmc {

/// One-sided spectrum per frame; bins = win/2 + 1 (the FFT length equals the window).
struct Spectrogram {
  Index frames = 0;
  Index bins = 0;
  int fft_size = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(Index t, Index k) { return data[static_cast<std::size_t>(t * bins + k)]; }
  const std::complex<double>& at(Index t, Index k) const { return data[static_cast<std::size_t>(t * bins + k)]; }
  /// |X|^2 as a frames x bins matrix.
  Matrix power() const;
};

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

/// Windowed DFT frames; frame count = 1 + floor((len - win) / hop).
/// Throws EmptyInputError when the clip is shorter than one window and
/// ConfigError when win < hop.
Spectrogram stft(const AudioClip& clip, int win, int hop);

/// Weighted overlap-add inverse with a Hann synthesis window. Output length
/// is (frames - 1) * hop + fft_size.
std::vector<double> istft(const Spectrogram& spec, int hop);

/// Owns an FFTW real-to-complex plan for a fixed length. Not thread-safe to
/// construct concurrently (FFTW planner restriction); execution is reentrant
/// per instance only.

class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  /// `in` has n samples; `out` receives n/2 + 1 bins.
  void forward(const double* in, std::complex<double>* out);

 private:
  int n_;
  double* in_;
  void* out_;
  void* plan_;
};

/// Inverse of RealFft (unnormalized, like FFTW: result is n times the signal).
class RealIfft {
 public:
  explicit RealIfft(int n);
  ~RealIfft();
  RealIfft(const RealIfft&) = delete;
  RealIfft& operator=(const RealIfft&) = delete;

  int size() const { return n_; }
  void inverse(const std::complex<double>* in, double* out);

 private:
  int n_;
  void* in_;
  double* out_;
  void* plan_;
};

}  // namespace vtmc
