// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "vtmc/trainloop/checks.hpp"
#include "vtmc/trainloop/train.hpp"

using namespace vtmc;

namespace {

// One small corpus shared by every case in this file.
struct Fixture {
  std::filesystem::path root;
  CorpusConfig corpus;
  FeatureExtractor fx;
  Dataset mixed;  // 128 records, all conditions
  Dataset dev;    // 200 records, half keyword
  Dataset quiet;  // 300 quiet records for first-pass training
  Dataset quiet_heldout;

  Fixture() {
    root = std::filesystem::temp_directory_path() / ("vtmc_train_" + std::to_string(::getpid()));
    std::filesystem::remove_all(root);
    corpus.seed = 77;
    corpus.splits = {
        {"mixed", {16, 16, 16, 16}, {16, 16, 16, 16}, {0, 0, 0, 0}, 10.0},
        {"dev", {25, 25, 25, 25}, {25, 25, 25, 25}, {0, 0, 0, 0}, 10.0},
        {"quiet", {150, 0, 0, 0}, {150, 0, 0, 0}, {0, 0, 0, 0}, 10.0},
        {"quiet_heldout", {20, 0, 0, 0}, {20, 0, 0, 0}, {0, 0, 0, 0}, 10.0},
    };
    const auto m = build_corpus(corpus, root);
    mixed = Dataset::load(m.at("mixed"), fx);
    dev = Dataset::load(m.at("dev"), fx);
    quiet = Dataset::load(m.at("quiet"), fx);
    quiet_heldout = Dataset::load(m.at("quiet_heldout"), fx);
  }
  ~Fixture() { std::filesystem::remove_all(root); }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

double rel_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, (a[i] - b[i]).cwiseAbs().maxCoeff());
    scale = std::max({scale, a[i].cwiseAbs().maxCoeff(), b[i].cwiseAbs().maxCoeff()});
  }
  return diff / scale;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("learning rate table over 28 epochs") {
  const TrainConfig cfg;
  for (int e = 1; e <= 28; ++e) {
    double expected;
    if (e <= 10) expected = 0.0005;
    else if (e <= 16) expected = 0.000125;
    else if (e <= 22) expected = 0.00003125;
    else expected = 0.0000078125;
    CHECK(learning_rate(cfg, e) == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK(learning_rate(cfg, 1) == 0.0005);
  CHECK_THROWS_AS(learning_rate(cfg, 0), ConfigError);
}

TEST_CASE("train config round-trips and rejects bad values") {
  TrainConfig cfg;
  cfg.variant = "tac";
  cfg.epochs = 3;
  cfg.decay_epochs = {2};
  const auto j = cfg.to_json();
  CHECK(TrainConfig::from_json(j).to_json() == j);
  auto bad = j;
  bad["variant"] = "lstm";
  CHECK_THROWS_AS(TrainConfig::from_json(bad), ConfigError);
  bad = j;
  bad["epochs"] = 0;
  CHECK_THROWS_AS(TrainConfig::from_json(bad), ConfigError);
}

TEST_CASE("dataset caches every channel and the alignment") {
  auto& f = fixture();
  REQUIRE(f.mixed.size() == 128);
  CHECK(f.mixed.errors().empty());
  for (std::size_t i = 0; i < f.mixed.size(); ++i) {
    const auto& u = f.mixed[i];
    for (int c = 1; c < kNumChannels; ++c) CHECK(u.mel[c].rows() == u.frames());
    CHECK(static_cast<Index>(u.frame_phones.size()) == u.frames());
    CHECK(u.pseudo_sc == 0);
  }
  const auto norm = f.mixed.fit_normalizer();
  const auto b = f.mixed.batch(0, norm);
  CHECK(b.channels.size() == kNumChannels);
  CHECK(b.selected == b.channels[0]);
  CHECK(b.selected.cols() == kFeatureDim);
}

TEST_CASE("gradient accumulation over shards equals the full batch") {
  auto& f = fixture();
  const auto norm = f.mixed.fit_normalizer();
  for (Variant v : {Variant::Baseline, Variant::ModTac}) {
    SecondPassModel model(SecondPassConfig::tiny(v));
    Rng rng(3);
    model.init(rng);
    const auto items = iota(128);
    const auto full = batch_gradient(model, model.params(), f.mixed, norm, items, 0, 11, 0.1);
    const auto sharded = batch_gradient(model, model.params(), f.mixed, norm, items, 32, 11, 0.1);
    CHECK(full.used == 128);
    CHECK(std::abs(full.loss - sharded.loss) <= 1e-6 * std::abs(full.loss));
    CHECK(rel_diff(full.grads, sharded.grads) <= 1e-6);
  }
}

TEST_CASE("training loss on a fixed batch decreases over the first epochs") {
  auto& f = fixture();
  const auto norm = f.mixed.fit_normalizer();
  SecondPassModel model(SecondPassConfig::desk(Variant::Baseline));
  Rng rng(5);
  model.init(rng);
  auto params = model.params();
  AdamState adam(params, AdamConfig{});
  const std::vector<std::size_t> fixed{0, 17, 40, 63, 90, 111};
  double prev = batch_gradient(model, params, f.mixed, norm, fixed, 0, 0, 0.0).loss;
  Rng order_rng(9);
  auto order = iota(f.mixed.size());
  for (int epoch = 1; epoch <= 5; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t b = 0; b < order.size(); b += 8) {
      const std::vector<std::size_t> items(order.begin() + static_cast<long>(b), order.begin() + static_cast<long>(b + 8));
      const auto g = batch_gradient(model, params, f.mixed, norm, items, 0, epoch * 1000 + b, 0.1);
      adam.step(params, g.grads);
    }
    const double now = batch_gradient(model, params, f.mixed, norm, fixed, 0, 0, 0.0).loss;
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("train writes metrics and checkpoints and is deterministic") {
  auto& f = fixture();
  TrainConfig cfg;
  cfg.variant = "modtac";
  cfg.preset = "tiny";
  cfg.epochs = 2;
  const auto a = train(cfg, f.mixed, f.dev, f.root / "run_a");
  const auto b = train(cfg, f.mixed, f.dev, f.root / "run_b");
  REQUIRE(a.metrics.size() == 2);
  CHECK(a.metrics.back().train_loss == b.metrics.back().train_loss);
  CHECK(a.metrics.back().dev.loss == b.metrics.back().dev.loss);
  CHECK(read_file(f.root / "run_a" / "best.ckpt") == read_file(f.root / "run_b" / "best.ckpt"));

  std::ifstream in(f.root / "run_a" / "metrics.tsv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 3);
  CHECK(std::filesystem::exists(f.root / "run_a" / "last.ckpt"));
  CHECK(TrainConfig::from_json(nlohmann::json::parse(read_file(f.root / "run_a" / "train_config.json"))).to_json() ==
        cfg.to_json());

  const auto bundle = load_second_pass(load_checkpoint(a.best_checkpoint));
  CHECK(bundle.model.variant() == Variant::ModTac);
  const auto dev = evaluate_dev(bundle.model, f.dev, bundle.norm);
  const auto best = a.metrics[static_cast<std::size_t>(a.best_epoch - 1)].dev;
  CHECK(dev.loss == best.loss);
  CHECK(dev.gap == best.gap);
  CHECK_THROWS_AS(load_first_pass(load_checkpoint(a.best_checkpoint)), ConfigError);
}

TEST_CASE("non-finite loss aborts and keeps the last good weights") {
  auto& f = fixture();
  TrainConfig cfg;
  cfg.variant = "baseline";
  cfg.preset = "tiny";
  cfg.epochs = 1;
  cfg.lr = 1e300;  // the first step overflows the weights
  const auto dir = f.root / "run_nan";
  CHECK_THROWS_AS(train(cfg, f.mixed, f.dev, dir), TrainingError);
  const auto ck = load_checkpoint(dir / "last.ckpt");
  for (const auto& [name, m] : ck.entries) CHECK(m.allFinite());
}

TEST_CASE("untrained second pass shows no dev separation") {
  auto& f = fixture();
  REQUIRE(f.dev.size() >= 200);
  const auto norm = f.dev.fit_normalizer();
  SecondPassModel model(SecondPassConfig::desk(Variant::Baseline));
  Rng rng(21);
  model.init(rng);
  const auto d = evaluate_dev(model, f.dev, norm);
  CHECK(d.n_pos == 100);
  CHECK(d.n_neg == 100);
  CHECK(std::abs(d.gap) < 2.0 * d.gap_stderr);
  const auto again = evaluate_dev(model, f.dev, norm);
  CHECK(again.gap == d.gap);
  CHECK(again.loss == d.loss);
}

TEST_CASE("first pass reaches 80% frame accuracy on held-out quiet speech") {
  auto& f = fixture();
  TrainConfig cfg;
  cfg.variant = "firstpass";
  cfg.epochs = 10;
  const auto r = train(cfg, f.quiet, f.quiet_heldout, f.root / "run_fp");
  const auto fp = load_first_pass(load_checkpoint(r.best_checkpoint));
  const auto d = evaluate_dev(fp.dnn, fp.hmm, f.quiet_heldout, fp.norm);
  MESSAGE("held-out frame accuracy " << d.frame_accuracy);
  CHECK(d.frame_accuracy > 0.80);
  CHECK(d.gap > 0.0);
}

TEST_CASE("trained desk second pass separates keyword from other speech") {
  auto& f = fixture();
  TrainConfig cfg;
  cfg.variant = "baseline";
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.decay_epochs = {};
  const auto r = train(cfg, f.quiet, f.dev, f.root / "run_sp");
  const auto& last = r.metrics.back().dev;
  MESSAGE("dev gap " << last.gap << " +- " << last.gap_stderr);
  CHECK(last.gap > 0.0);
}

TEST_CASE("module gradient checks pass and catch corruption") {
  for (const auto& name : gradcheck_modules()) {
    CAPTURE(name);
    const auto rep = check_module(name);
    CHECK(rep.pass());
    CHECK(rep.worst() <= 1e-6);
    GradcheckOptions bad;
    bad.corrupt_scale = 1.01;
    CHECK_FALSE(check_module(name, bad).pass());
  }
  CHECK_THROWS_AS(check_module("lstm"), ConfigError);
}
