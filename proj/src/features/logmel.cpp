// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/features/logmel.hpp"

#include <algorithm>
#include <cmath>

namespace vtmc {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(int n_mels, int fft_size, int sample_rate, double fmin, double fmax) {
  if (n_mels != kMelBands) throw ConfigError("logmel: n_mels must be 40");
  if (fmin < 0 || fmin >= fmax) throw ConfigError("logmel: need 0 <= fmin < fmax");
  if (fmax > sample_rate / 2.0) throw ConfigError("logmel: fmax exceeds Nyquist");
  const int bins = fft_size / 2 + 1;
  const double lo = hz_to_mel(fmin);
  const double hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
  for (int i = 0; i < n_mels + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(lo + (hi - lo) * i / (n_mels + 1));
  weights_ = Matrix::Zero(n_mels, bins);
  centers_.resize(static_cast<std::size_t>(n_mels));
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m + 1)];
    const double right = edges[static_cast<std::size_t>(m + 2)];
    centers_[static_cast<std::size_t>(m)] = center;
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0;
      if (f > left && f <= center) w = (f - left) / (center - left);
      else if (f > center && f < right) w = (right - f) / (right - center);
      weights_(m, k) = w;
    }
    const double total = weights_.row(m).sum();
    if (total <= 0) throw ConfigError("logmel: filter " + std::to_string(m) + " covers no FFT bin");
    weights_.row(m) /= total;
  }
}

Matrix logmel(const Spectrogram& spec, const MelFilterbank& bank, double floor) {
  if (bank.weights().cols() != spec.bins) throw DimensionError("logmel: filterbank/spectrogram bin mismatch");
  Matrix mel = spec.power() * bank.weights().transpose();
  return (mel.array() + floor).log().matrix();
}

Matrix logmel(const Spectrogram& spec, int n_mels, double fmin, double fmax, int sample_rate, double floor) {
  const MelFilterbank bank(n_mels, spec.fft_size, sample_rate, fmin, fmax);
  return logmel(spec, bank, floor);
}

Matrix stack_context(const Matrix& mel, int left, int right) {
  const Index t_len = mel.rows();
  const Index d = mel.cols();
  const int width = left + right + 1;
  Matrix out(t_len, d * width);
  for (Index t = 0; t < t_len; ++t) {
    for (int j = 0; j < width; ++j) {
      const Index src = std::clamp<Index>(t - left + j, 0, t_len - 1);
      out.block(t, j * d, 1, d) = mel.row(src);
    }
  }
  return out;
}

}  // namespace vtmc
