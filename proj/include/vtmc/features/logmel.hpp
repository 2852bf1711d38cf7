// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "vtmc/features/stft.hpp"

namespace vtmc {

inline constexpr int kMelBands = 40;
inline constexpr int kContext = 3;
inline constexpr int kFeatureDim = kMelBands * (2 * kContext + 1);  // 280

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters with centers equally spaced on the mel scale. Each
/// triangle spans its two neighbours' centers and is area-normalized (weights
/// sum to one) so a white spectrum maps to a flat mel profile.
class MelFilterbank {
 public:
  MelFilterbank(int n_mels, int fft_size, int sample_rate, double fmin, double fmax);

  int n_mels() const { return static_cast<int>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }  // n_mels x bins
  /// Center frequency in Hz of filter k.
  double center_hz(int k) const { return centers_[static_cast<std::size_t>(k)]; }

 private:
  Matrix weights_;
  std::vector<double> centers_;
};

/// log(mel-filtered power + floor), frames x n_mels. n_mels must be 40 and
/// fmax must not exceed Nyquist (ConfigError otherwise).
Matrix logmel(const Spectrogram& spec, int n_mels, double fmin, double fmax, int sample_rate = kSampleRate,
              double floor = 1e-10);
Matrix logmel(const Spectrogram& spec, const MelFilterbank& bank, double floor = 1e-10);

/// Frame t becomes concat(mel[t-left .. t+right]) with edge replication.
Matrix stack_context(const Matrix& mel, int left = kContext, int right = kContext);

}  // namespace vtmc
