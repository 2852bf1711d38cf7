// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

namespace vtmc {

inline constexpr int kSampleRate = 16000;

struct AudioClip {
  std::vector<double> samples;  // nominal range [-1, 1)
  int sample_rate = kSampleRate;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Reads a 16 kHz mono 16-bit PCM WAV file. Anything else is an IoError.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM (samples clipped to [-1, 1]); atomic via temp+rename.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Rounds samples to what a write_wav/read_wav round trip would return.
void quantize_pcm16(AudioClip& clip);

/// Duration of a WAV file from its header alone.
double wav_duration(const std::filesystem::path& path);

}  // namespace vtmc
