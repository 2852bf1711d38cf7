// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/features/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "vtmc/errors.hpp"
#include "vtmc/ndcore/checkpoint.hpp"

namespace vtmc {

namespace {

std::uint32_t u32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t u16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

struct WavLayout {
  std::size_t data_offset = 0;
  std::size_t data_bytes = 0;
};

WavLayout parse_header(const std::string& b, const std::filesystem::path& path) {
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) {
    throw IoError("not a RIFF/WAVE file: " + path.string());
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::size_t len = u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (len < 16 || body + 16 > b.size()) throw IoError("truncated fmt chunk: " + path.string());
      const auto format = u16(b, body);
      const auto channels = u16(b, body + 2);
      const auto rate = u32(b, body + 4);
      const auto bits = u16(b, body + 14);
      if (format != 1 || channels != 1 || rate != static_cast<std::uint32_t>(kSampleRate) || bits != 16) {
        throw IoError("expected 16 kHz mono 16-bit PCM: " + path.string());
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IoError("data chunk before fmt chunk: " + path.string());
      WavLayout l;
      l.data_offset = body;
      l.data_bytes = std::min(len, b.size() - body) & ~std::size_t{1};
      return l;
    }
    pos = body + len + (len & 1);
  }
  throw IoError("no data chunk: " + path.string());
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  const std::string b = read_file(path);
  const WavLayout l = parse_header(b, path);
  AudioClip clip;
  clip.samples.resize(l.data_bytes / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const auto s = static_cast<std::int16_t>(u16(b, l.data_offset + 2 * i));
    clip.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate) throw IoError("only 16 kHz audio is supported: " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, kSampleRate);
  put32(out, kSampleRate * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (double x : clip.samples) {
    const double c = std::clamp(x, -1.0, 32767.0 / 32768.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
  }
  write_file_atomic(path, out);
}

void quantize_pcm16(AudioClip& clip) {
  for (double& x : clip.samples) x = static_cast<double>(std::lround(std::clamp(x, -1.0, 32767.0 / 32768.0) * 32768.0)) / 32768.0;
}

double wav_duration(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::string head(4096, '\0');
  f.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(f.gcount()));
  const WavLayout l = parse_header(head, path);
  const auto total = std::filesystem::file_size(path);
  const std::size_t bytes = std::min<std::size_t>(u32(head, l.data_offset - 4), total - l.data_offset);
  return static_cast<double>(bytes / 2) / kSampleRate;
}

}  // namespace vtmc
