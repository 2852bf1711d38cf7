// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtmc/simcorpus/scene.hpp"

namespace vtmc {

/// One manifest line.
struct ManifestRow {
  std::string utt_id;
  std::array<std::string, kNumChannels> channels;  // relative to the manifest directory
  std::vector<int> transcript;
  Condition condition = Condition::Quiet;
  bool keyword = false;
  int pseudo_sc = 0;

  bool operator==(const ManifestRow&) const = default;
};

/// Forced alignment and scene bookkeeping, keyed by utt_id.
struct AlignmentRow {
  std::string utt_id;
  std::uint64_t seed = 0;
  int target_channel = 1;
  Index keyword_start = -1;
  Index keyword_end = -1;
  std::vector<int> frame_phones;
  SceneSpec spec;
};

/// A long keyword-free stream, regenerated from its seed on demand.
struct NegativeRow {
  std::string id;
  Condition condition = Condition::Quiet;
  std::uint64_t seed = 0;
  double seconds = 0;

  bool operator==(const NegativeRow&) const = default;
};

struct DatasetManifest {
  std::filesystem::path dir;
  std::vector<ManifestRow> rows;
  std::vector<AlignmentRow> alignments;  // same order as rows; may be empty
  std::vector<NegativeRow> negatives;

  std::filesystem::path channel_path(const ManifestRow& row, int ch) const { return dir / row.channels[static_cast<std::size_t>(ch)]; }
  std::array<AudioClip, kNumChannels> load_audio(const ManifestRow& row) const;
  double negative_hours() const;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_alignments(const std::filesystem::path& path, const std::vector<AlignmentRow>& rows);
std::vector<AlignmentRow> read_alignments(const std::filesystem::path& path);
void write_negatives(const std::filesystem::path& path, const std::vector<NegativeRow>& rows);
std::vector<NegativeRow> read_negatives(const std::filesystem::path& path);

/// Reads manifest.tsv plus the alignments.tsv and negatives.tsv sidecars when present.
DatasetManifest load_split(const std::filesystem::path& dir);

struct SplitConfig {
  std::string name;
  std::array<int, kNumConditions> keyword{};
  std::array<int, kNumConditions> other{};
  std::array<int, kNumConditions> negative_files{};
  double negative_seconds = 180.0;

  int total() const;
  nlohmann::json to_json() const;
  static SplitConfig from_json(const nlohmann::json& j);
};

struct CorpusConfig {
  std::uint64_t seed = 1;
  SceneConfig scene;
  PhonemeConfig phonemes;
  std::vector<SplitConfig> splits;

  /// train 2000 (prior 0.5), dev 320, eval 1600 positives + 20 h of negatives.
  static CorpusConfig desk();
  /// A few records per split, for tests.
  static CorpusConfig smoke();
  const SplitConfig& split(const std::string& name) const;

  nlohmann::json to_json() const;
  static CorpusConfig from_json(const nlohmann::json& j);
};

/// Record seed for index i of split s. Splits draw from disjoint index ranges
/// through a bijective mixer, so seeds never collide across splits.
std::uint64_t record_seed(std::uint64_t corpus_seed, int split_index, std::uint64_t i);
std::uint64_t negative_seed(std::uint64_t corpus_seed, int split_index, std::uint64_t i);

/// Scene and audio for one record, exactly as build_corpus renders it.
UtteranceRecord make_record(const CorpusConfig& cfg, int split_index, std::uint64_t i, Condition condition,
                            bool keyword, const PhonemeModel& phonemes);

/// Writes <out>/corpus.json and, per split, <out>/<split>/{manifest,alignments,negatives}.tsv
/// with WAVs under <out>/<split>/wav. Returns one manifest per split.
std::map<std::string, DatasetManifest> build_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir);

NegativeStream load_negative(const NegativeRow& row, const CorpusConfig& cfg, const PhonemeModel& phonemes);

std::string join_ints(const std::vector<int>& v);
std::vector<int> split_ints(const std::string& s);

}  // namespace vtmc
