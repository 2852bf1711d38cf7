// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/evalharness/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vtmc/errors.hpp"

namespace vtmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> forward_all(const std::vector<NamedModel>& models, const FeatureExtractor& fx, const ChannelMel& mel,
                                const TriggerResult& trig, int pad) {
  std::vector<double> s;
  for (const auto& m : models) s.push_back(second_pass_segment(*m.model, fx, mel, trig, pad));
  return s;
}

UtteranceScore score_one(const FirstPassBundle& fp, const std::vector<NamedModel>& models, const FeatureExtractor& fx,
                         const ChannelMel& mel, const PipelineConfig& cfg) {
  UtteranceScore u;
  u.scan = first_pass_scan(fp, fx, mel);
  u.forwarded = u.scan.selected.score > cfg.fp_threshold;
  if (u.forwarded) u.scores = forward_all(models, fx, mel, u.scan.selected, cfg.segment_padding);
  else u.scores.assign(models.size(), kNegInf);
  return u;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json PipelineConfig::to_json() const {
  // JSON has no infinities; an open gate is written as null
  const nlohmann::json gate = std::isfinite(fp_threshold) ? nlohmann::json(fp_threshold) : nlohmann::json(nullptr);
  return {{"fp_threshold", gate},         {"fp_keep_rate", fp_keep_rate},
          {"segment_padding", segment_padding},   {"lookahead_frames", lookahead_frames},
          {"refractory_frames", refractory_frames}, {"dedup_seconds", dedup_seconds},
          {"target_fa_per_hour", target_fa_per_hour}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (j.contains("fp_threshold")) c.fp_threshold = j["fp_threshold"].is_null() ? kNegInf : j["fp_threshold"].get<double>();
  c.fp_keep_rate = j.value("fp_keep_rate", c.fp_keep_rate);
  c.segment_padding = j.value("segment_padding", c.segment_padding);
  c.lookahead_frames = j.value("lookahead_frames", c.lookahead_frames);
  c.refractory_frames = j.value("refractory_frames", c.refractory_frames);
  c.dedup_seconds = j.value("dedup_seconds", c.dedup_seconds);
  c.target_fa_per_hour = j.value("target_fa_per_hour", c.target_fa_per_hour);
  if (c.segment_padding < 0 || c.lookahead_frames < 0 || c.refractory_frames < 0 || !(c.target_fa_per_hour > 0)) {
    throw ConfigError("invalid pipeline config");
  }
  return c;
}

ChannelMel channel_mel(const std::array<AudioClip, kNumChannels>& audio, const FeatureExtractor& fx) {
  ChannelMel m;
  for (int c = 0; c < kNumChannels; ++c) m[static_cast<std::size_t>(c)] = fx.logmel(audio[static_cast<std::size_t>(c)]);
  return m;
}

ChannelMel channel_mel(const CachedUtterance& u) {
  ChannelMel m;
  for (int c = 0; c < kNumChannels; ++c) m[static_cast<std::size_t>(c)] = u.mel[static_cast<std::size_t>(c)].cast<double>();
  return m;
}

Matrix stacked_rows(const FeatureExtractor& fx, const Matrix& mel, const FeatureNormalizer& norm, Index start, Index end) {
  const Index T = mel.rows();
  if (T == 0) throw EmptyInputError("empty channel");
  start = std::clamp<Index>(start, 0, T - 1);
  end = std::clamp<Index>(end, start, T - 1);
  const Index ctx = std::max(fx.config().left_context, fx.config().right_context);
  const Index lo = std::max<Index>(0, start - ctx);
  const Index hi = std::min<Index>(T - 1, end + ctx);
  const Matrix stacked = fx.stack(mel.middleRows(lo, hi - lo + 1), &norm).frames;
  return stacked.middleRows(start - lo, end - start + 1);
}

FirstPassScan first_pass_scan(const FirstPassBundle& fp, const FeatureExtractor& fx, const ChannelMel& mel) {
  const KeywordHmm hmm(fp.hmm);
  FirstPassScan scan;
  std::vector<TriggerResult> all;
  for (int c = 0; c < kNumChannels; ++c) {
    const Matrix feats = fx.stack(mel[static_cast<std::size_t>(c)], &fp.norm).frames;
    TriggerResult r = hmm_decode_stream(hmm, fp.dnn.posteriors(feats));
    r.channel = c;
    scan.channel[static_cast<std::size_t>(c)] = r;
    all.push_back(r);
  }
  scan.selected = select_channel(all);
  return scan;
}

std::vector<TriggerResult> first_pass_stream(const FirstPassBundle& fp, const FeatureExtractor& fx, const ChannelMel& mel,
                                             const PipelineConfig& cfg) {
  const KeywordHmm hmm(fp.hmm);
  const Index T = mel[0].rows();
  // per-frame best streaming result over channels
  std::vector<TriggerResult> best(static_cast<std::size_t>(T));
  for (int c = 0; c < kNumChannels; ++c) {
    const Matrix post = fp.dnn.posteriors(fx.stack(mel[static_cast<std::size_t>(c)], &fp.norm).frames);
    StreamingKeywordDecoder dec(hmm);
    for (Index t = 0; t < T; ++t) {
      const auto f = dec.push(&post(t, 0));
      auto& b = best[static_cast<std::size_t>(t)];
      if (f.score > b.score) b = TriggerResult{f.score, c, f.start, t};
    }
  }
  std::vector<TriggerResult> out;
  Index t = 0;
  while (t < T) {
    if (!(best[static_cast<std::size_t>(t)].score > cfg.fp_threshold)) {
      ++t;
      continue;
    }
    Index peak = t;
    for (Index k = t + 1; k <= std::min(T - 1, t + cfg.lookahead_frames); ++k) {
      if (best[static_cast<std::size_t>(k)].score > best[static_cast<std::size_t>(peak)].score) peak = k;
    }
    out.push_back(best[static_cast<std::size_t>(peak)]);
    t = peak + cfg.refractory_frames + 1;
  }
  return out;
}

double second_pass_segment(const SecondPassBundle& sp, const FeatureExtractor& fx, const ChannelMel& mel,
                           const TriggerResult& trig, int pad) {
  const Index s = trig.start - pad;
  const Index e = trig.end + pad;
  std::vector<Matrix> ch;
  const bool multi = is_multichannel(sp.model.variant());
  for (int c = 0; c < kNumChannels; ++c) {
    if (multi || c == trig.channel) ch.push_back(stacked_rows(fx, mel[static_cast<std::size_t>(c)], sp.norm, s, e));
    else ch.emplace_back();
  }
  MultichannelBatch b;
  b.selected = ch[static_cast<std::size_t>(trig.channel)];
  b.selected_index = trig.channel;
  if (multi) b.channels = std::move(ch);
  return keyword_score(sp.model.encode(b), keyword_phonemes());
}

double calibrate_first_pass(const FirstPassBundle& fp, const Dataset& dev, double keep_rate) {
  std::vector<double> s;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    if (!dev[i].keyword) continue;
    s.push_back(first_pass_scan(fp, dev.extractor(), channel_mel(dev[i])).selected.score);
  }
  if (s.empty()) throw InsufficientDataError("no dev positives to calibrate the first-pass gate");
  std::sort(s.begin(), s.end());
  const auto k = static_cast<std::size_t>(std::floor((1.0 - keep_rate) * static_cast<double>(s.size())));
  // just below the k-th lowest score so that score keeps passing
  const double v = s[std::min(k, s.size() - 1)];
  return std::nextafter(v, kNegInf);
}

std::size_t ScoreTable::variant_index(const std::string& v) const {
  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (variants[i] == v) return i;
  }
  throw ConfigError("score table has no variant '" + v + "'");
}

std::vector<PositiveScore> ScoreTable::positives(const std::string& variant) const {
  const std::size_t k = variant_index(variant);
  std::vector<PositiveScore> p;
  for (const auto& u : utterances) {
    if (u.keyword) p.push_back({u.condition, u.scores[k]});
  }
  return p;
}

NegativeSet ScoreTable::negative_set(const std::string& variant) const {
  const std::size_t k = variant_index(variant);
  NegativeSet n;
  n.id = "negatives";
  n.dedup_seconds = config.dedup_seconds;
  for (std::size_t f = 0; f < negatives.size(); ++f) {
    n.file_seconds.push_back(negatives[f].seconds);
    for (const auto& e : negatives[f].events) n.events.push_back({static_cast<int>(f), e.time, e.scores[k]});
  }
  return n;
}

double ScoreTable::negative_seconds() const {
  double s = 0;
  for (const auto& n : negatives) s += n.seconds;
  return s;
}

std::string ScoreTable::utterance_tsv() const {
  std::ostringstream os;
  os << "utt_id\tcondition\tkeyword\ttarget_channel\tfp_ch0\tfp_ch1\tfp_ch2\tfp_ch3\tselected\tstart\tend\tforwarded";
  for (const auto& v : variants) os << '\t' << v;
  os << '\n';
  for (const auto& u : utterances) {
    os << u.utt_id << '\t' << condition_name(u.condition) << '\t' << u.keyword << '\t' << u.target_channel;
    for (const auto& c : u.scan.channel) os << '\t' << fmt(c.score);
    os << '\t' << u.scan.selected.channel << '\t' << u.scan.selected.start << '\t' << u.scan.selected.end << '\t'
       << u.forwarded;
    for (double s : u.scores) os << '\t' << fmt(s);
    os << '\n';
  }
  return os.str();
}

std::string ScoreTable::negative_tsv() const {
  std::ostringstream os;
  os << "file\tcondition\ttime\tfp_score\tselected\tstart\tend";
  for (const auto& v : variants) os << '\t' << v;
  os << '\n';
  for (const auto& n : negatives) {
    for (const auto& e : n.events) {
      os << n.id << '\t' << condition_name(n.condition) << '\t' << fmt(e.time) << '\t' << fmt(e.trigger.score) << '\t'
         << e.trigger.channel << '\t' << e.trigger.start << '\t' << e.trigger.end;
      for (double s : e.scores) os << '\t' << fmt(s);
      os << '\n';
    }
  }
  return os.str();
}

namespace {

std::vector<std::string> tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

double num(const std::string& s, const std::filesystem::path& file) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw IoError(file.string() + ": bad number '" + s + "'");
  return v;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& file, std::size_t cols) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto r = tabs(line);
    if (r.size() != cols) throw IoError(file.string() + ": expected " + std::to_string(cols) + " columns");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

void write_score_table(const ScoreTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta{{"variants", table.variants}, {"pipeline", table.config.to_json()}, {"errors", table.errors}};
  std::ostringstream files;
  files << "id\tcondition\tseconds\n";
  for (const auto& n : table.negatives) files << n.id << '\t' << condition_name(n.condition) << '\t' << fmt(n.seconds) << '\n';
  write_file_atomic(dir / "utterances.tsv", table.utterance_tsv());
  write_file_atomic(dir / "negatives.tsv", table.negative_tsv());
  write_file_atomic(dir / "negative_files.tsv", files.str());
  write_file_atomic(dir / "scores.json", meta.dump(2) + "\n");
}

ScoreTable read_score_table(const std::filesystem::path& dir) {
  ScoreTable t;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(dir / "scores.json"));
    t.variants = meta.at("variants").get<std::vector<std::string>>();
    t.errors = meta.at("errors").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "scores.json").string() + ": " + e.what());
  }
  t.config = PipelineConfig::from_json(meta.at("pipeline"));
  const std::size_t nv = t.variants.size();

  const auto ufile = dir / "utterances.tsv";
  for (const auto& r : read_rows(ufile, 12 + nv)) {
    UtteranceScore u;
    u.utt_id = r[0];
    u.condition = parse_condition(r[1]);
    u.keyword = r[2] == "1";
    u.target_channel = static_cast<int>(num(r[3], ufile));
    for (int c = 0; c < kNumChannels; ++c) {
      u.scan.channel[static_cast<std::size_t>(c)].score = num(r[4 + static_cast<std::size_t>(c)], ufile);
      u.scan.channel[static_cast<std::size_t>(c)].channel = c;
    }
    u.scan.selected.channel = static_cast<int>(num(r[8], ufile));
    if (u.scan.selected.channel < 0 || u.scan.selected.channel >= kNumChannels) throw IoError(ufile.string() + ": bad channel");
    u.scan.selected.score = u.scan.channel[static_cast<std::size_t>(u.scan.selected.channel)].score;
    u.scan.selected.start = static_cast<Index>(num(r[9], ufile));
    u.scan.selected.end = static_cast<Index>(num(r[10], ufile));
    u.forwarded = r[11] == "1";
    for (std::size_t k = 0; k < nv; ++k) u.scores.push_back(num(r[12 + k], ufile));
    t.utterances.push_back(std::move(u));
  }

  const auto ffile = dir / "negative_files.tsv";
  std::vector<std::pair<std::string, std::size_t>> index;
  for (const auto& r : read_rows(ffile, 3)) {
    StreamScore s;
    s.id = r[0];
    s.condition = parse_condition(r[1]);
    s.seconds = num(r[2], ffile);
    index.emplace_back(s.id, t.negatives.size());
    t.negatives.push_back(std::move(s));
  }
  std::sort(index.begin(), index.end());
  const auto efile = dir / "negatives.tsv";
  for (const auto& r : read_rows(efile, 7 + nv)) {
    const auto it = std::lower_bound(index.begin(), index.end(), std::make_pair(r[0], std::size_t{0}));
    if (it == index.end() || it->first != r[0]) throw IoError(efile.string() + ": unknown file '" + r[0] + "'");
    StreamEvent e;
    e.time = num(r[2], efile);
    e.trigger.score = num(r[3], efile);
    e.trigger.channel = static_cast<int>(num(r[4], efile));
    e.trigger.start = static_cast<Index>(num(r[5], efile));
    e.trigger.end = static_cast<Index>(num(r[6], efile));
    for (std::size_t k = 0; k < nv; ++k) e.scores.push_back(num(r[7 + k], efile));
    t.negatives[it->second].events.push_back(std::move(e));
  }
  return t;
}

ScoreTable score_utterances(const FirstPassBundle& fp, const std::vector<NamedModel>& models, const Dataset& data,
                            const PipelineConfig& cfg) {
  ScoreTable table;
  table.config = cfg;
  for (const auto& m : models) table.variants.push_back(m.variant);
  for (std::size_t i = 0; i < data.size(); ++i) {
    UtteranceScore u = score_one(fp, models, data.extractor(), channel_mel(data[i]), cfg);
    u.utt_id = data[i].id;
    u.condition = data[i].condition;
    u.keyword = data[i].keyword;
    u.target_channel = data[i].target_channel;
    table.utterances.push_back(std::move(u));
  }
  return table;
}

ScoreTable score_corpus(const FirstPassBundle& fp, const std::vector<NamedModel>& models, const DatasetManifest& split,
                        const CorpusConfig& corpus, const PipelineConfig& cfg, const Progress& progress) {
  const FeatureExtractor fx;
  ScoreTable table;
  table.config = cfg;
  for (const auto& m : models) table.variants.push_back(m.variant);
  for (std::size_t i = 0; i < split.rows.size(); ++i) {
    const ManifestRow& row = split.rows[i];
    ChannelMel mel;
    try {
      mel = channel_mel(split.load_audio(row), fx);
    } catch (const Error& e) {
      table.errors.push_back(row.utt_id + ": " + e.what());
      continue;
    }
    UtteranceScore u = score_one(fp, models, fx, mel, cfg);
    u.utt_id = row.utt_id;
    u.condition = row.condition;
    u.keyword = row.keyword;
    if (i < split.alignments.size()) u.target_channel = split.alignments[i].target_channel;
    table.utterances.push_back(std::move(u));
    if (progress && (i + 1) % 200 == 0) progress("scored " + std::to_string(i + 1) + " utterances");
  }
  const PhonemeModel phonemes(corpus.phonemes);
  for (std::size_t f = 0; f < split.negatives.size(); ++f) {
    const NegativeRow& row = split.negatives[f];
    const NegativeStream stream = load_negative(row, corpus, phonemes);
    const ChannelMel mel = channel_mel(stream.channels, fx);
    StreamScore s;
    s.id = row.id;
    s.condition = row.condition;
    s.seconds = stream.seconds();
    for (const auto& trig : first_pass_stream(fp, fx, mel, cfg)) {
      StreamEvent e;
      e.trigger = trig;
      e.time = static_cast<double>(trig.end) * fx.config().frame_shift();
      e.scores = forward_all(models, fx, mel, trig, cfg.segment_padding);
      s.events.push_back(std::move(e));
    }
    table.negatives.push_back(std::move(s));
    if (progress && (f + 1) % 20 == 0) {
      progress("scanned " + std::to_string(f + 1) + "/" + std::to_string(split.negatives.size()) + " negative files");
    }
  }
  return table;
}

}  // namespace vtmc
