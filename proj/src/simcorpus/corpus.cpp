// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/simcorpus/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "vtmc/ndcore/checkpoint.hpp"

namespace vtmc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, '\t')) out.push_back(cur);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = split_tabs(line);
    if (f.size() != columns) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                    " fields, got " + std::to_string(f.size()));
    }
    rows.push_back(std::move(f));
  }
  return rows;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::array<int, kNumConditions> int4(const nlohmann::json& j, const char* key) {
  std::array<int, kNumConditions> a{};
  if (!j.contains(key)) return a;
  for (Condition c : all_conditions()) a[static_cast<std::size_t>(c)] = j.at(key).value(condition_name(c), 0);
  return a;
}

nlohmann::json int4_json(const std::array<int, kNumConditions>& a) {
  nlohmann::json j;
  for (Condition c : all_conditions()) j[condition_name(c)] = a[static_cast<std::size_t>(c)];
  return j;
}

}  // namespace

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> v;
  std::istringstream is(s);
  int x;
  while (is >> x) v.push_back(x);
  return v;
}

std::array<AudioClip, kNumChannels> DatasetManifest::load_audio(const ManifestRow& row) const {
  std::array<AudioClip, kNumChannels> a;
  for (int c = 0; c < kNumChannels; ++c) a[static_cast<std::size_t>(c)] = read_wav(channel_path(row, c));
  return a;
}

double DatasetManifest::negative_hours() const {
  double s = 0;
  for (const auto& n : negatives) s += n.seconds;
  return s / 3600.0;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ostringstream os;
  os << "#utt_id\tch0\tch1\tch2\tch3\ttranscript\tcondition\tkeyword_flag\tpseudo_sc\n";
  for (const auto& r : rows) {
    os << r.utt_id;
    for (const auto& c : r.channels) os << '\t' << c;
    os << '\t' << join_ints(r.transcript) << '\t' << condition_name(r.condition) << '\t' << (r.keyword ? 1 : 0) << '\t'
       << r.pseudo_sc << '\n';
  }
  write_file_atomic(path, os.str());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::vector<ManifestRow> out;
  for (const auto& f : read_table(path, 9)) {
    ManifestRow r;
    r.utt_id = f[0];
    for (int c = 0; c < kNumChannels; ++c) r.channels[static_cast<std::size_t>(c)] = f[static_cast<std::size_t>(c + 1)];
    r.transcript = split_ints(f[5]);
    r.condition = parse_condition(f[6]);
    r.keyword = f[7] == "1";
    r.pseudo_sc = std::stoi(f[8]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_alignments(const std::filesystem::path& path, const std::vector<AlignmentRow>& rows) {
  std::ostringstream os;
  os << "#utt_id\tseed\ttarget_channel\tkeyword_start\tkeyword_end\tframe_phones\tscene\n";
  for (const auto& r : rows) {
    os << r.utt_id << '\t' << r.seed << '\t' << r.target_channel << '\t' << r.keyword_start << '\t' << r.keyword_end << '\t'
       << join_ints(r.frame_phones) << '\t' << r.spec.to_json().dump() << '\n';
  }
  write_file_atomic(path, os.str());
}

std::vector<AlignmentRow> read_alignments(const std::filesystem::path& path) {
  std::vector<AlignmentRow> out;
  for (const auto& f : read_table(path, 7)) {
    AlignmentRow r;
    r.utt_id = f[0];
    r.seed = std::stoull(f[1]);
    r.target_channel = std::stoi(f[2]);
    r.keyword_start = std::stoll(f[3]);
    r.keyword_end = std::stoll(f[4]);
    r.frame_phones = split_ints(f[5]);
    r.spec = SceneSpec::from_json(nlohmann::json::parse(f[6]));
    out.push_back(std::move(r));
  }
  return out;
}

void write_negatives(const std::filesystem::path& path, const std::vector<NegativeRow>& rows) {
  std::ostringstream os;
  os << "#id\tcondition\tseed\tseconds\n";
  for (const auto& r : rows) {
    os << r.id << '\t' << condition_name(r.condition) << '\t' << r.seed << '\t' << fmt_double(r.seconds) << '\n';
  }
  write_file_atomic(path, os.str());
}

std::vector<NegativeRow> read_negatives(const std::filesystem::path& path) {
  std::vector<NegativeRow> out;
  for (const auto& f : read_table(path, 4)) {
    out.push_back({f[0], parse_condition(f[1]), std::stoull(f[2]), std::stod(f[3])});
  }
  return out;
}

DatasetManifest load_split(const std::filesystem::path& dir) {
  DatasetManifest m;
  m.dir = dir;
  m.rows = read_manifest(dir / "manifest.tsv");
  if (std::filesystem::exists(dir / "alignments.tsv")) {
    m.alignments = read_alignments(dir / "alignments.tsv");
    if (m.alignments.size() != m.rows.size()) throw IoError((dir / "alignments.tsv").string() + ": row count differs from manifest");
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      if (m.alignments[i].utt_id != m.rows[i].utt_id) throw IoError((dir / "alignments.tsv").string() + ": utt_id order differs from manifest");
    }
  }
  if (std::filesystem::exists(dir / "negatives.tsv")) m.negatives = read_negatives(dir / "negatives.tsv");
  return m;
}

int SplitConfig::total() const {
  int n = 0;
  for (std::size_t c = 0; c < kNumConditions; ++c) n += keyword[c] + other[c];
  return n;
}

nlohmann::json SplitConfig::to_json() const {
  return {{"name", name},
          {"keyword", int4_json(keyword)},
          {"other", int4_json(other)},
          {"negative_files", int4_json(negative_files)},
          {"negative_seconds", negative_seconds}};
}

SplitConfig SplitConfig::from_json(const nlohmann::json& j) {
  SplitConfig s;
  s.name = j.at("name").get<std::string>();
  s.keyword = int4(j, "keyword");
  s.other = int4(j, "other");
  s.negative_files = int4(j, "negative_files");
  s.negative_seconds = j.value("negative_seconds", s.negative_seconds);
  return s;
}

CorpusConfig CorpusConfig::desk() {
  CorpusConfig c;
  c.splits = {
      {"train", {250, 250, 250, 250}, {250, 250, 250, 250}, {0, 0, 0, 0}, 180.0},
      {"dev", {40, 40, 40, 40}, {40, 40, 40, 40}, {0, 0, 0, 0}, 180.0},
      {"eval", {600, 400, 300, 300}, {0, 0, 0, 0}, {100, 100, 100, 100}, 180.0},
  };
  return c;
}

CorpusConfig CorpusConfig::smoke() {
  CorpusConfig c;
  c.splits = {
      {"train", {2, 2, 2, 2}, {2, 2, 2, 2}, {0, 0, 0, 0}, 20.0},
      {"dev", {1, 1, 1, 1}, {1, 1, 1, 1}, {0, 0, 0, 0}, 20.0},
      {"eval", {2, 1, 1, 1}, {0, 0, 0, 0}, {1, 1, 0, 0}, 20.0},
  };
  return c;
}

const SplitConfig& CorpusConfig::split(const std::string& name) const {
  for (const auto& s : splits) {
    if (s.name == name) return s;
  }
  throw ConfigError("corpus has no split '" + name + "'");
}

nlohmann::json CorpusConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["scene"] = scene.to_json();
  j["phonemes"] = phonemes.to_json();
  j["splits"] = nlohmann::json::array();
  for (const auto& s : splits) j["splits"].push_back(s.to_json());
  return j;
}

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
  CorpusConfig c = desk();
  c.seed = j.value("seed", c.seed);
  if (j.contains("scene")) c.scene = SceneConfig::from_json(j.at("scene"));
  if (j.contains("phonemes")) c.phonemes = PhonemeConfig::from_json(j.at("phonemes"));
  if (j.contains("splits")) {
    c.splits.clear();
    for (const auto& s : j.at("splits")) c.splits.push_back(SplitConfig::from_json(s));
  }
  return c;
}

std::uint64_t record_seed(std::uint64_t corpus_seed, int split_index, std::uint64_t i) {
  if (split_index < 0 || split_index >= 8 || i >= (1ULL << 31)) throw ConfigError("record index out of range");
  return splitmix64((corpus_seed << 36) + (static_cast<std::uint64_t>(split_index) << 32) + i);
}

std::uint64_t negative_seed(std::uint64_t corpus_seed, int split_index, std::uint64_t i) {
  if (split_index < 0 || split_index >= 8 || i >= (1ULL << 31)) throw ConfigError("record index out of range");
  return splitmix64((corpus_seed << 36) + (static_cast<std::uint64_t>(split_index) << 32) + (1ULL << 31) + i);
}

UtteranceRecord make_record(const CorpusConfig& cfg, int split_index, std::uint64_t i, Condition condition, bool keyword,
                            const PhonemeModel& phonemes) {
  const std::uint64_t seed = record_seed(cfg.seed, split_index, i);
  Rng rng(seed);
  const SceneSpec spec = draw_scene(condition, keyword, rng, cfg.scene);
  UtteranceRecord rec = synth_utterance(spec, splitmix64(seed), phonemes, cfg.scene);
  rec.seed = seed;
  return rec;
}

NegativeStream load_negative(const NegativeRow& row, const CorpusConfig& cfg, const PhonemeModel& phonemes) {
  return render_negative_stream(row.condition, row.seed, row.seconds, phonemes, cfg.scene);
}

std::map<std::string, DatasetManifest> build_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file_atomic(out_dir / "corpus.json", cfg.to_json().dump(2) + "\n");
  const PhonemeModel phonemes(cfg.phonemes);

  std::map<std::string, DatasetManifest> result;
  for (std::size_t s = 0; s < cfg.splits.size(); ++s) {
    const SplitConfig& split = cfg.splits[s];
    const auto dir = out_dir / split.name;
    std::filesystem::create_directories(dir / "wav", ec);
    if (ec) throw IoError("cannot create " + (dir / "wav").string() + ": " + ec.message());

    DatasetManifest m;
    m.dir = dir;
    std::uint64_t i = 0;
    for (Condition cond : all_conditions()) {
      const auto c = static_cast<std::size_t>(cond);
      for (int kw = 1; kw >= 0; --kw) {
        const int count = kw ? split.keyword[c] : split.other[c];
        for (int n = 0; n < count; ++n, ++i) {
          UtteranceRecord rec = make_record(cfg, static_cast<int>(s), i, cond, kw == 1, phonemes);
          char id[64];
          std::snprintf(id, sizeof id, "%s_%06llu", split.name.c_str(), static_cast<unsigned long long>(i));
          rec.id = id;
          ManifestRow row;
          row.utt_id = rec.id;
          for (int ch = 0; ch < kNumChannels; ++ch) {
            const std::string rel = "wav/" + rec.id + "_ch" + std::to_string(ch) + ".wav";
            write_wav(dir / rel, rec.channels[static_cast<std::size_t>(ch)]);
            row.channels[static_cast<std::size_t>(ch)] = rel;
          }
          row.transcript = rec.transcript;
          row.condition = cond;
          row.keyword = rec.keyword();
          row.pseudo_sc = rec.pseudo_sc;
          m.rows.push_back(std::move(row));
          m.alignments.push_back({rec.id, rec.seed, rec.target_channel(), rec.keyword_start, rec.keyword_end,
                                  rec.frame_phones, rec.spec});
        }
      }
    }
    std::uint64_t j = 0;
    for (Condition cond : all_conditions()) {
      for (int n = 0; n < split.negative_files[static_cast<std::size_t>(cond)]; ++n, ++j) {
        char id[64];
        std::snprintf(id, sizeof id, "%s_neg_%05llu", split.name.c_str(), static_cast<unsigned long long>(j));
        m.negatives.push_back({id, cond, negative_seed(cfg.seed, static_cast<int>(s), j), split.negative_seconds});
      }
    }
    write_manifest(dir / "manifest.tsv", m.rows);
    write_alignments(dir / "alignments.tsv", m.alignments);
    write_negatives(dir / "negatives.tsv", m.negatives);
    result.emplace(split.name, std::move(m));
  }
  return result;
}

}  // namespace vtmc
