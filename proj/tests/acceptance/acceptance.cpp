// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance --work DIR --cli PATH [--only N]...
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include <sys/wait.h>

#include "unit/ctc_oracle.hpp"
#include "unit/hmm_oracle.hpp"
#include "unit/tac_oracle.hpp"
#include "vtmc/evalharness/pipeline.hpp"
#include "vtmc/trainloop/checks.hpp"

using namespace vtmc;
using namespace vtmc::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2e", v);
  return b;
}

std::string fixed(double v, int digits = 2) {
  char b[32];
  std::snprintf(b, sizeof b, "%.*f", digits, v);
  return b;
}

std::vector<Matrix> permute(const std::vector<Matrix>& xs, const std::vector<std::size_t>& pi) {
  std::vector<Matrix> out;
  for (std::size_t i : pi) out.push_back(xs[i]);
  return out;
}

// 1 ----------------------------------------------------------------------

Outcome tac_equivariance() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const Index dim = kFeatureDim, hidden = SecondPassConfig::desk(Variant::Tac).tac_hidden, frames = 12;
  double worst = 0, worst_sc = 0;
  for (int pair = 0; pair < 100; ++pair) {
    const Index n = 2 + pair % 3;
    std::vector<std::size_t> pi(static_cast<std::size_t>(n));
    std::iota(pi.begin(), pi.end(), 0);
    do std::shuffle(pi.begin(), pi.end(), rng);
    while (std::is_sorted(pi.begin(), pi.end()));
    const auto z = random_channels(n, frames, dim, rng);
    const auto zp = permute(z, pi);
    if (pair % 2 == 0) {
      TacBlock b("tac", dim, hidden);
      ParamList ps;
      b.collect(ps);
      randomize(ps, rng, 0.05);
      const auto out = b.forward(z), outp = b.forward(zp);
      const auto expect = permute(out, pi);
      for (Index i = 0; i < n; ++i) worst = std::max(worst, max_abs(outp[i], expect[i]));
    } else {
      ModTacBlock b("tac", dim, hidden);
      ParamList ps;
      b.collect(ps);
      randomize(ps, rng, 0.05);
      const Matrix sc = random_normal(frames, dim, rng);
      const auto [out, osc] = b.forward(z, sc);
      const auto [outp, oscp] = b.forward(zp, sc);
      const auto expect = permute(out, pi);
      for (Index i = 0; i < n; ++i) worst = std::max(worst, max_abs(outp[i], expect[i]));
      worst_sc = std::max(worst_sc, max_abs(osc, oscp));
    }
  }
  const double secs = since(t0);
  return {worst <= 1e-6 && worst_sc <= 1e-6 && secs < 10.0,
          "100 pairs N in {2,3,4}: max |tac(pi x) - pi tac(x)| " + sci(worst) + ", selected-channel drift " + sci(worst_sc) +
              " (tol 1e-6), " + fixed(secs) + " s (limit 10 s)"};
}

// 2 ----------------------------------------------------------------------

Outcome residual_identity() {
  Rng rng(102);
  int exact = 0;
  for (int k = 0; k < 50; ++k) {
    const Index n = 1 + k % 4, dim = 5 + k % 7, hidden = 3 + k % 5, frames = 1 + k % 9;
    TacBlock t("tac", dim, hidden);
    ModTacBlock m("tac", dim, hidden);
    for (LinearPrelu* l : {&t.P, &t.Q, &t.R, &m.P, &m.Q, &m.R, &m.S}) {
      l->act.slope.value = random_normal(1, l->act.slope.value.cols(), rng);
    }
    const auto z = random_channels(n, frames, dim, rng);
    const Matrix sc = random_normal(frames, dim, rng, 10.0);
    const auto a = t.forward(z);
    const auto [b, bsc] = m.forward(z, sc);
    bool same = bsc == sc;
    for (Index i = 0; i < n; ++i) same = same && a[i] == z[i] && b[i] == z[i];
    exact += same;
  }
  return {exact == 50, std::to_string(exact) + "/50 inputs bit-equal through zero-parameter TAC and ModTAC"};
}

// 3 ----------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  bool ok = true;
  double worst = 0;
  int caught = 0;
  std::string names;
  const std::vector<std::string> mods{"linear", "prelu", "tac", "modtac", "encoder", "ctc"};
  for (const auto& name : mods) {
    const auto r = check_module(name);
    ok = ok && r.pass() && r.worst() <= 1e-6;
    worst = std::max(worst, r.worst());
    GradcheckOptions bad;
    bad.corrupt_scale = 1.01;
    caught += !check_module(name, bad).pass();
    names += (names.empty() ? "" : ",") + name;
  }
  const double secs = since(t0);
  ok = ok && caught == static_cast<int>(mods.size()) && secs < 120.0;
  return {ok, names + ": worst relative error " + sci(worst) + " (tol 1e-6), corrupted caught " + std::to_string(caught) +
                  "/" + std::to_string(mods.size()) + ", " + fixed(secs) + " s (limit 120 s)"};
}

// 4 ----------------------------------------------------------------------

Outcome ctc_oracle() {
  Rng rng(104);
  std::uniform_int_distribution<int> tlen(1, 8), llen(1, 3), alpha(2, 5);
  double worst = 0;
  int both_inf = 0, mismatch = 0;
  for (int k = 0; k < 200; ++k) {
    const int A = alpha(rng), T = tlen(rng);
    std::uniform_int_distribution<int> lab(1, A - 1);
    std::vector<int> labels(static_cast<std::size_t>(llen(rng)));
    for (int& v : labels) v = lab(rng);
    const Matrix logits = random_normal(T, A, rng, 2.0);
    const double got = ctc_forward_logprob(logits, labels);
    const double ref = ctc_bruteforce(logits, labels);
    if (std::isinf(ref) || std::isinf(got)) {
      if (got == ref) ++both_inf;
      else ++mismatch;
      continue;
    }
    worst = std::max(worst, std::abs(got - ref));
  }
  return {mismatch == 0 && worst <= 1e-10,
          "200 instances T<=8 L<=3 alphabet<=5: max |forward - enumeration| " + sci(worst) + " (tol 1e-10), " +
              std::to_string(both_inf) + " infeasible agree, " + std::to_string(mismatch) + " disagree"};
}

// 5 ----------------------------------------------------------------------

Outcome streaming_offline() {
  Rng rng(105);
  double worst = 0;
  int segment_mismatch = 0;
  for (int k = 0; k < 100; ++k) {
    HmmConfig cfg = keyword_hmm_config();
    cfg.states_per_phoneme = 1 + k % 3;
    const KeywordHmm hmm(cfg);
    const Matrix p = random_posteriors(30 + 3 * k, kFirstPassClasses, rng, k % 2 ? 0.3 : 1.0);
    const auto s = hmm_decode_stream(hmm, p);
    const auto o = offline_viterbi(hmm, p);
    worst = std::max(worst, std::abs(s.score - o.score));
    segment_mismatch += s.start != o.start || s.end != o.end;
  }
  return {worst <= 1e-9, "100 posteriorgrams: max |stream - offline| " + sci(worst) + " (tol 1e-9), " +
                             std::to_string(segment_mismatch) + " segment boundary differences"};
}

// 6 ----------------------------------------------------------------------

struct Experiment {
  fs::path work;
  CorpusConfig corpus = CorpusConfig::desk();
  PipelineConfig pipeline;
  std::vector<std::string> variants{"baseline", "tac", "modtac"};
  int resamples = 1000;
  std::string note;  // set when the run did not produce scores
};

// Runs `make` unless <dir>/stamp.json matches `key`.
bool cached(const fs::path& dir, const nlohmann::json& key, const std::function<void()>& make) {
  const auto stamp = dir / "stamp.json";
  if (fs::exists(stamp)) {
    try {
      if (nlohmann::json::parse(read_file(stamp)) == key) return true;
    } catch (const std::exception&) {
    }
  }
  make();
  fs::create_directories(dir);
  write_file_atomic(stamp, key.dump(2) + "\n");
  return false;
}

fs::path train_stage(const Experiment& ex, const Dataset& train_set, const Dataset& dev_set, const std::string& variant) {
  TrainConfig cfg;
  cfg.variant = variant;
  const auto dir = ex.work / ("model_" + variant);
  const auto t0 = Clock::now();
  const bool hit = cached(dir, {{"corpus", ex.corpus.to_json()}, {"train", cfg.to_json()}},
                          [&] { train(cfg, train_set, dev_set, dir); });
  std::cerr << "  " << variant << (hit ? " cached" : " trained in " + fixed(since(t0), 0) + " s") << '\n';
  return dir / "best.ckpt";
}

Outcome directional(Experiment& ex) {
  const auto t0 = Clock::now();
  const auto corpus_dir = ex.work / "corpus";
  cached(corpus_dir, ex.corpus.to_json(), [&] {
    fs::remove_all(corpus_dir);
    build_corpus(ex.corpus, corpus_dir);
  });
  std::cerr << "  corpus ready " << fixed(since(t0), 0) << " s\n";
  const FeatureExtractor fx;
  const auto train_set = Dataset::load(load_split(corpus_dir / "train"), fx);
  const auto dev_set = Dataset::load(load_split(corpus_dir / "dev"), fx);

  nlohmann::json score_key{{"corpus", ex.corpus.to_json()}, {"pipeline", ex.pipeline.to_json()}};
  const auto fp = load_first_pass(load_checkpoint(train_stage(ex, train_set, dev_set, "firstpass")));
  std::vector<SecondPassBundle> bundles;
  for (const auto& v : ex.variants) {
    const auto ck = train_stage(ex, train_set, dev_set, v);
    bundles.push_back(load_second_pass(load_checkpoint(ck)));
    score_key["models"][v] = nlohmann::json::parse(read_file(ck.parent_path() / "stamp.json"));
  }
  const auto score_dir = ex.work / "scores";
  cached(score_dir, score_key, [&] {
    PipelineConfig pc = ex.pipeline;
    pc.fp_threshold = calibrate_first_pass(fp, dev_set, pc.fp_keep_rate);
    std::vector<NamedModel> models;
    for (std::size_t i = 0; i < ex.variants.size(); ++i) models.push_back({ex.variants[i], &bundles[i]});
    std::size_t done = 0;
    const auto table = score_corpus(fp, models, load_split(corpus_dir / "eval"), ex.corpus, pc, [&](const std::string&) {
      if (++done % 500 == 0) std::cerr << "  scored " << done << '\n';
    });
    write_score_table(table, score_dir);
  });
  const auto table = read_score_table(score_dir);

  const double target = ex.pipeline.target_fa_per_hour;
  std::vector<EvalReport> reports;
  for (const auto& v : ex.variants) {
    const auto neg = table.negative_set(v);
    reports.push_back(frr_report(table.positives(v), neg, fix_operating_point(neg, target), v));
  }
  write_file_atomic(ex.work / "report.tsv", report_tsv(reports));
  write_file_atomic(ex.work / "det.csv", det_csv(reports));
  const auto& base = reports[0];
  const auto& tac = reports[1];
  const auto& mod = reports[2];
  const auto q = static_cast<std::size_t>(Condition::Quiet);
  const auto noisy = static_cast<std::size_t>(Condition::Noisy);
  const Condition quiet = Condition::Quiet;
  const auto ci = bootstrap_frr_difference(table.positives("baseline"), table.negative_set("baseline"),
                                           table.positives("modtac"), table.negative_set("modtac"), target, &quiet,
                                           ex.resamples, 0.9, 606);
  const bool a = mod.conditions[q].frr < base.conditions[q].frr && ci.lo > 0.0;
  const bool b = mod.conditions[noisy].frr <= tac.conditions[noisy].frr;
  const bool c = mod.overall.frr <= base.overall.frr;
  const double secs = since(t0);
  const double hours = table.negative_seconds() / 3600.0;
  auto pct = [](double v) { return fixed(100.0 * v); };
  std::ostringstream os;
  os << "(a) quiet FRR modtac " << pct(mod.conditions[q].frr) << "% vs baseline " << pct(base.conditions[q].frr)
     << "%, diff 90% CI [" << pct(ci.lo) << ", " << pct(ci.hi) << "] " << (a ? "ok" : "NOT MET") << "; (b) noisy modtac "
     << pct(mod.conditions[noisy].frr) << "% vs tac " << pct(tac.conditions[noisy].frr) << "% " << (b ? "ok" : "NOT MET")
     << "; (c) overall modtac " << pct(mod.overall.frr) << "% vs baseline " << pct(base.overall.frr) << "% "
     << (c ? "ok" : "NOT MET") << "; " << fixed(hours, 1) << " h negatives at " << target << " FA/h, "
     << fixed(secs / 60.0, 1) << " min (limit 240)";
  return {a && b && c && hours >= 20.0 && secs <= 4 * 3600.0, os.str()};
}

// 7 ----------------------------------------------------------------------

Outcome parameter_counts() {
  // closed forms at the paper preset, independent of the layer code
  const Index d = 256, ff = 1024, in = kFeatureDim, out = kCtcClasses, blocks = 6, h = 3 * d;
  auto linear = [](Index i, Index o) { return i * o + o; };
  auto linear_prelu = [&](Index i, Index o) { return linear(i, o) + o; };
  const Index block = 2 * (2 * d) + 4 * linear(d, d) + linear(d, ff) + linear(ff, d);
  const Index base = linear(in, d) + blocks * block + 2 * d + linear(d, out);
  const Index tac = base + linear_prelu(in, h) + linear_prelu(h, h) + linear_prelu(2 * h, in);
  const Index mod = base + linear_prelu(in, h) + linear_prelu(h, h) + linear_prelu(3 * h, in) + linear_prelu(h, in);
  const Index got_b = SecondPassModel(SecondPassConfig::paper(Variant::Baseline)).total_params();
  const Index got_t = SecondPassModel(SecondPassConfig::paper(Variant::Tac)).total_params();
  const Index got_m = SecondPassModel(SecondPassConfig::paper(Variant::ModTac)).total_params();
  auto m1 = [](Index n) { return std::round(static_cast<double>(n) / 1e5) / 10.0; };
  const bool order = got_b < got_t && got_t < got_m;
  const bool closed = got_b == base && got_t == tac && got_m == mod;
  const bool rounded = m1(got_b) == 4.8 && m1(got_t) == 6.1 && m1(got_m) == 6.5;
  return {order && closed,
          "baseline " + std::to_string(got_b) + " < tac " + std::to_string(got_t) + " < modtac " + std::to_string(got_m) +
              (closed ? ", equal to the closed-form derivation" : ", DIFFERS from the closed form") +
              (rounded ? ", rounds to 4.8M/6.1M/6.5M" : ", does not round to 4.8M/6.1M/6.5M")};
}

// 8 ----------------------------------------------------------------------

int run(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

Outcome eval_identities(const Experiment& ex, const fs::path& cli) {
  const auto scores = ex.work / "scores";
  if (!fs::exists(scores / "scores.json")) return {false, "no score table (" + ex.note + ")"};
  std::string detail;
  bool ok = true;
  for (const auto& v : ex.variants) {
    const auto out = ex.work / ("eval_" + v);
    const std::string cmd = "\"" + cli.string() + "\" eval --assert --variant " + v + " --scores \"" + scores.string() +
                            "\" --out \"" + out.string() + "\" > \"" + (ex.work / ("eval_" + v + ".log")).string() + "\" 2>&1";
    const int rc = run(cmd);
    ok = ok && rc == 0;
    detail += v + " exit " + std::to_string(rc) + "; ";
  }
  // the same table scored twice from audio gives identical bytes
  const auto corpus_dir = ex.work / "corpus";
  auto split = load_split(corpus_dir / "eval");
  split.rows.resize(std::min<std::size_t>(split.rows.size(), 12));
  split.negatives.resize(std::min<std::size_t>(split.negatives.size(), 2));
  const auto fp = load_first_pass(load_checkpoint(ex.work / "model_firstpass" / "best.ckpt"));
  const auto sp = load_second_pass(load_checkpoint(ex.work / "model_modtac" / "best.ckpt"));
  PipelineConfig pc = read_score_table(scores).config;
  const auto a = score_corpus(fp, {{"modtac", &sp}}, split, ex.corpus, pc);
  const auto b = score_corpus(fp, {{"modtac", &sp}}, split, ex.corpus, pc);
  const bool same = a.utterance_tsv() == b.utterance_tsv() && a.negative_tsv() == b.negative_tsv();
  ok = ok && same;
  detail += std::string("re-scoring ") + (same ? "bit-identical" : "DIFFERS");
  return {ok, "eval --assert (DET monotone, FRR in [0,1], weighted overall, re-run): " + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  Experiment ex;
  std::string work = "acceptance_work", cli = "vtmc";
  std::vector<int> only;
  app.add_option("--work", work, "cache directory for the end-to-end experiment");
  app.add_option("--cli", cli, "path to the vtmc tool");
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--resamples", ex.resamples, "bootstrap resamples");
  CLI11_PARSE(app, argc, argv);
  ex.work = work;
  fs::create_directories(ex.work);

  auto want = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  int failed = 0;
  auto report = [&](int k, const std::string& title, const std::function<Outcome()>& fn) {
    if (!want(k)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
      if (k == 6) ex.note = o.detail;
    }
    failed += !o.pass;
    std::cout << "criterion " << k << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << title << ": " << o.detail << std::endl;
  };

  report(1, "TAC permutation equivariance", tac_equivariance);
  report(2, "zero-parameter residual identity", residual_identity);
  report(3, "gradient verification", gradients);
  report(4, "CTC vs path enumeration", ctc_oracle);
  report(5, "streaming vs offline decoding", streaming_offline);
  report(6, "directional replication on the synthetic corpus", [&] { return directional(ex); });
  report(7, "parameter-count ordering (paper preset)", parameter_counts);
  report(8, "evaluation harness identities", [&] { return eval_identities(ex, cli); });
  return failed == 0 ? 0 : 1;
}
