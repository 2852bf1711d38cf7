// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/trainloop/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace vtmc {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

nlohmann::json fp_config_json(const FirstPassConfig& c) {
  return {{"input_dim", c.input_dim}, {"hidden", c.hidden}, {"layers", c.layers}, {"classes", c.classes}};
}

FirstPassConfig fp_config_from_json(const nlohmann::json& j) {
  FirstPassConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.classes = j.value("classes", c.classes);
  return c;
}

std::vector<int> frame_labels(const CachedUtterance& u) {
  if (static_cast<Index>(u.frame_phones.size()) != u.frames()) {
    throw ConfigError(u.id + ": first-pass training needs frame alignments");
  }
  std::vector<int> labels;
  labels.reserve(u.frame_phones.size());
  for (int p : u.frame_phones) labels.push_back(first_pass_class(p));
  return labels;
}

struct MeanVar {
  double sum = 0, sumsq = 0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double var() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
  }
};

void fill_gap(DevMetrics& d, const MeanVar& pos, const MeanVar& neg) {
  d.n_pos = pos.n;
  d.n_neg = neg.n;
  d.pos_mean = pos.mean();
  d.neg_mean = neg.mean();
  d.gap = d.pos_mean - d.neg_mean;
  d.gap_stderr = std::sqrt((pos.n ? pos.var() / static_cast<double>(pos.n) : 0.0) +
                           (neg.n ? neg.var() / static_cast<double>(neg.n) : 0.0));
}

std::vector<Matrix> zero_grads(const ParamList& params) {
  std::vector<Matrix> g;
  for (const Parameter* p : params) g.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  return g;
}

bool finite(const std::vector<Matrix>& g) {
  for (const auto& m : g) {
    if (!m.allFinite()) return false;
  }
  return true;
}

}  // namespace

TrainConfig::TrainConfig() { hmm = keyword_hmm_config(); }

SecondPassConfig TrainConfig::second_pass() const {
  SecondPassConfig c = SecondPassConfig::preset(preset, parse_variant(variant));
  c.dropout = dropout;
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"variant", variant},
          {"preset", preset},
          {"epochs", epochs},
          {"lr", lr},
          {"decay_factor", decay_factor},
          {"decay_epochs", decay_epochs},
          {"batch_size", batch_size},
          {"shard_size", shard_size},
          {"fp_batch_utterances", fp_batch_utterances},
          {"dropout", dropout},
          {"seed", seed},
          {"first_pass", fp_config_json(first_pass)},
          {"hmm", hmm.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.variant = j.value("variant", c.variant);
  c.preset = j.value("preset", c.preset);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.decay_epochs = j.value("decay_epochs", c.decay_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.shard_size = j.value("shard_size", c.shard_size);
  c.fp_batch_utterances = j.value("fp_batch_utterances", c.fp_batch_utterances);
  c.dropout = j.value("dropout", c.dropout);
  c.seed = j.value("seed", c.seed);
  if (j.contains("first_pass")) c.first_pass = fp_config_from_json(j.at("first_pass"));
  if (j.contains("hmm")) c.hmm = HmmConfig::from_json(j.at("hmm"));
  if (!c.is_first_pass()) parse_variant(c.variant);
  if (c.epochs < 1 || c.batch_size < 1 || c.lr <= 0 || c.decay_factor <= 0) throw ConfigError("invalid training schedule");
  return c;
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch < 1) throw ConfigError("epochs are numbered from 1");
  double lr = cfg.lr;
  for (int d : cfg.decay_epochs) {
    if (epoch >= d) lr /= cfg.decay_factor;
  }
  return lr;
}

HmmConfig keyword_hmm_config() {
  HmmConfig h;
  h.keyword_classes = keyword_classes();
  return h;
}

DevMetrics evaluate_dev(const SecondPassModel& model, const Dataset& dev, const FeatureNormalizer& norm) {
  DevMetrics d;
  MeanVar loss, pos, neg;
  const auto& kw = keyword_phonemes();
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const Matrix logits = model.encode(dev.batch(i, norm));
    const auto& u = dev[i];
    if (logits.rows() >= ctc_min_frames(u.transcript)) loss.add(ctc_loss_grad(logits, u.transcript).loss);
    (u.keyword ? pos : neg).add(keyword_score(logits, kw));
  }
  d.loss = loss.mean();
  fill_gap(d, pos, neg);
  return d;
}

DevMetrics evaluate_dev(const FirstPassDnn& model, const HmmConfig& hmm_cfg, const Dataset& dev,
                        const FeatureNormalizer& norm) {
  DevMetrics d;
  const KeywordHmm hmm(hmm_cfg);
  MeanVar pos, neg;
  double ce = 0;
  std::size_t frames = 0, correct = 0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const Matrix post = model.posteriors(dev.features(i, 0, norm));
    const auto& u = dev[i];
    if (!u.frame_phones.empty()) {
      const auto labels = frame_labels(u);
      for (Index t = 0; t < post.rows(); ++t) {
        const int y = labels[static_cast<std::size_t>(t)];
        ce -= std::log(std::max(post(t, y), 1e-300));
        Index arg;
        post.row(t).maxCoeff(&arg);
        correct += arg == y;
        ++frames;
      }
    }
    (u.keyword ? pos : neg).add(hmm_decode_stream(hmm, post).score);
  }
  d.loss = frames ? ce / static_cast<double>(frames) : 0.0;
  d.frame_accuracy = frames ? static_cast<double>(correct) / static_cast<double>(frames) : 0.0;
  fill_gap(d, pos, neg);
  return d;
}

BatchGradient batch_gradient(const SecondPassModel& model, ParamList params, const Dataset& data,
                             const FeatureNormalizer& norm, const std::vector<std::size_t>& items, int shard_size,
                             std::uint64_t dropout_seed, double dropout) {
  std::vector<std::size_t> usable;
  for (std::size_t i : items) {
    if (data[i].frames() >= ctc_min_frames(data[i].transcript)) usable.push_back(i);
  }
  BatchGradient out;
  out.grads = zero_grads(params);
  out.used = usable.size();
  if (usable.empty()) return out;
  const double inv = 1.0 / static_cast<double>(usable.size());
  const std::size_t shard = shard_size > 0 ? static_cast<std::size_t>(shard_size) : usable.size();
  for (std::size_t s0 = 0; s0 < usable.size(); s0 += shard) {
    Tape tape(true);
    std::vector<Rng> rngs;
    rngs.reserve(shard);
    Tape::Var total;
    bool first = true;
    for (std::size_t k = s0; k < std::min(usable.size(), s0 + shard); ++k) {
      const std::size_t i = usable[k];
      rngs.emplace_back(mix(dropout_seed, i));
      ForwardContext ctx;
      if (dropout > 0) {
        ctx.rng = &rngs.back();
        ctx.dropout = dropout;
      }
      const Tape::Var logits = model.encode(tape, data.batch(i, norm), ctx);
      const Tape::Var loss = ctc_loss(tape, logits, data[i].transcript);
      total = first ? loss : tape.add(total, loss);
      first = false;
    }
    const Tape::Var scaled = tape.scale(total, inv);
    out.loss += tape.value(scaled)(0, 0);
    tape.backward(scaled);
    for (std::size_t p = 0; p < params.size(); ++p) out.grads[p] += tape.param_grad(*params[p]);
  }
  return out;
}

std::string metrics_header() {
  return "epoch\tlr\ttrain_loss\tdev_loss\tdev_pos_mean\tdev_neg_mean\tdev_gap\tdev_gap_stderr\tdev_frame_acc\tseconds";
}

std::string metrics_line(const EpochMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d\t%.6g\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.4f\t%.1f", m.epoch, m.lr, m.train_loss,
                m.dev.loss, m.dev.pos_mean, m.dev.neg_mean, m.dev.gap, m.dev.gap_stderr, m.dev.frame_accuracy, m.seconds);
  return buf;
}

ModelCheckpoint first_pass_checkpoint(const FirstPassDnn& dnn, const FeatureNormalizer& norm, const HmmConfig& hmm) {
  ModelCheckpoint ck;
  ck.arch = "fp.dnn";
  ParamList ps;
  const_cast<FirstPassDnn&>(dnn).collect(ps);
  ck.add(ps);
  ck.meta["model"] = fp_config_json(dnn.config());
  ck.meta["normalizer"] = norm.to_json();
  ck.meta["hmm"] = hmm.to_json();
  return ck;
}

FirstPassBundle load_first_pass(const ModelCheckpoint& ckpt) {
  if (ckpt.arch != "fp.dnn") throw ConfigError("checkpoint holds '" + ckpt.arch + "', expected fp.dnn");
  FirstPassBundle b;
  b.dnn = FirstPassDnn(fp_config_from_json(ckpt.meta.at("model")));
  ParamList ps;
  b.dnn.collect(ps);
  ckpt.restore(ps);
  b.norm = FeatureNormalizer::from_json(ckpt.meta.at("normalizer"));
  b.hmm = HmmConfig::from_json(ckpt.meta.at("hmm"));
  return b;
}

ModelCheckpoint second_pass_checkpoint(const SecondPassModel& model, const FeatureNormalizer& norm) {
  ModelCheckpoint ck = model.to_checkpoint();
  ck.meta["normalizer"] = norm.to_json();
  return ck;
}

SecondPassBundle load_second_pass(const ModelCheckpoint& ckpt) {
  SecondPassBundle b;
  b.model = SecondPassModel::from_checkpoint(ckpt);
  if (!ckpt.meta.contains("normalizer")) throw ConfigError("second-pass checkpoint has no feature normalizer");
  b.norm = FeatureNormalizer::from_json(ckpt.meta.at("normalizer"));
  return b;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& dev_set,
                  const std::filesystem::path& out_dir) {
  if (train_set.size() == 0) throw EmptyInputError("empty training set");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file_atomic(out_dir / "train_config.json", cfg.to_json().dump(2) + "\n");

  const FeatureNormalizer norm = train_set.fit_normalizer();
  Rng init_rng(cfg.seed);
  const bool fp = cfg.is_first_pass();
  FirstPassDnn dnn;
  SecondPassModel sp;
  ParamList params;
  if (fp) {
    dnn = FirstPassDnn(cfg.first_pass);
    dnn.init(init_rng);
    dnn.collect(params);
  } else {
    sp = SecondPassModel(cfg.second_pass());
    sp.init(init_rng);
    params = sp.params();
  }
  const auto checkpoint = [&] { return fp ? first_pass_checkpoint(dnn, norm, cfg.hmm) : second_pass_checkpoint(sp, norm); };
  const auto dev_metrics = [&] { return fp ? evaluate_dev(dnn, cfg.hmm, dev_set, norm) : evaluate_dev(sp, dev_set, norm); };

  AdamConfig ac;
  ac.lr = cfg.lr;
  AdamState adam(params, ac);
  TrainResult result;
  result.best_checkpoint = out_dir / "best.ckpt";
  const auto last_path = out_dir / "last.ckpt";
  save_checkpoint(checkpoint(), last_path);
  std::string log = metrics_header() + "\n";
  write_file_atomic(out_dir / "metrics.tsv", log);
  double best_dev = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    adam.config().lr = learning_rate(cfg, epoch);
    Rng shuffle_rng(mix(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    std::size_t loss_n = 0;
    const std::size_t bs = fp ? static_cast<std::size_t>(cfg.fp_batch_utterances) : static_cast<std::size_t>(cfg.batch_size);

    for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
      const std::vector<std::size_t> items(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b0 + bs)));
      double loss = 0;
      std::vector<Matrix> grads;
      if (fp) {
        std::vector<Matrix> feats;
        std::vector<int> labels;
        Index rows = 0;
        for (std::size_t i : items) {
          feats.push_back(train_set.features(i, 0, norm));
          const auto l = frame_labels(train_set[i]);
          labels.insert(labels.end(), l.begin(), l.end());
          rows += feats.back().rows();
        }
        Matrix x(rows, feats.front().cols());
        Index r = 0;
        for (const auto& f : feats) {
          x.middleRows(r, f.rows()) = f;
          r += f.rows();
        }
        Tape tape(true);
        const Tape::Var l = tape.softmax_cross_entropy(dnn.logits(tape, tape.input(std::move(x))), labels);
        loss = tape.value(l)(0, 0);
        tape.backward(l);
        for (const Parameter* p : params) grads.push_back(tape.param_grad(*p));
      } else {
        const std::uint64_t dseed = mix(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) + b0);
        BatchGradient g = batch_gradient(sp, params, train_set, norm, items, cfg.shard_size, dseed, cfg.dropout);
        if (g.used == 0) continue;
        loss = g.loss;
        grads = std::move(g.grads);
      }
      if (!std::isfinite(loss) || !finite(grads)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + "; last good weights in " +
                            last_path.string());
      }
      adam.step(params, grads);
      loss_sum += loss;
      ++loss_n;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = adam.config().lr;
    m.train_loss = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;
    m.dev = dev_set.size() > 0 ? dev_metrics() : DevMetrics{};
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(m);
    log += metrics_line(m) + "\n";
    write_file_atomic(out_dir / "metrics.tsv", log);

    const ModelCheckpoint ck = checkpoint();
    save_checkpoint(ck, last_path);
    const double score = dev_set.size() > 0 ? m.dev.loss : m.train_loss;
    if (score < best_dev || result.best_epoch == 0) {
      best_dev = score;
      result.best_epoch = epoch;
      save_checkpoint(ck, result.best_checkpoint);
    }
  }
  return result;
}

}  // namespace vtmc
