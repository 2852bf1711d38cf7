// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
// vtmc: corpus synthesis, training, gradient checks, scoring, evaluation.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "vtmc/errors.hpp"
#include "vtmc/evalharness/pipeline.hpp"
#include "vtmc/trainloop/checks.hpp"

using namespace vtmc;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitAssert = 2;
constexpr int kExitIo = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string preset;
  std::string out;
  bool check = false;
};

nlohmann::json section(const Common& c, const std::string& name) {
  if (c.config.empty()) return nlohmann::json::object();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(c.config));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(c.config + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(c.config + ": top level must be an object");
  return doc.value(name, nlohmann::json::object());
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw ConfigError("--out is required");
  return c.out;
}

void check_variant(const std::string& v, bool allow_first_pass = false) {
  if (v.empty()) return;
  if (allow_first_pass && v == "firstpass") return;
  if (v != "baseline" && v != "tac" && v != "modtac") throw ConfigError("unknown variant '" + v + "'");
}

void check_preset(const std::string& p) {
  if (!p.empty() && p != "desk" && p != "paper") throw ConfigError("unknown preset '" + p + "'");
}

// synth ------------------------------------------------------------------

int run_synth(const Common& c, bool smoke) {
  const auto sec = section(c, "synth");
  CorpusConfig cfg = smoke ? CorpusConfig::smoke() : CorpusConfig::desk();
  if (!sec.empty()) cfg = CorpusConfig::from_json(sec);
  if (c.seed) cfg.seed = *c.seed;
  const auto out = require_out(c);
  const auto splits = build_corpus(cfg, out);
  for (const auto& [name, m] : splits) {
    std::cout << name << '\t' << m.rows.size() << " utterances\t" << m.negatives.size() << " negative files\t"
              << std::fixed << std::setprecision(2) << m.negative_hours() << " h\n";
  }
  return 0;
}

// train ------------------------------------------------------------------

int run_train(const Common& c, const std::string& corpus, int epochs) {
  TrainConfig cfg = TrainConfig::from_json(section(c, "train"));
  check_variant(c.variant, true);
  check_preset(c.preset);
  if (!c.variant.empty()) cfg.variant = c.variant;
  if (!c.preset.empty()) cfg.preset = c.preset;
  if (c.seed) cfg.seed = *c.seed;
  if (epochs > 0) {
    cfg.epochs = epochs;
    std::erase_if(cfg.decay_epochs, [&](int e) { return e > epochs; });
  }
  cfg = TrainConfig::from_json(cfg.to_json());
  const auto out = require_out(c);
  const FeatureExtractor fx;
  const auto train_set = Dataset::load(load_split(fs::path(corpus) / "train"), fx);
  const auto dev_set = Dataset::load(load_split(fs::path(corpus) / "dev"), fx);
  for (const auto& e : train_set.errors()) std::cerr << "skipped: " << e << '\n';
  std::cout << metrics_header() << '\n';
  const auto r = train(cfg, train_set, dev_set, out);
  for (const auto& m : r.metrics) std::cout << metrics_line(m) << '\n';
  std::cout << "best epoch " << r.best_epoch << " -> " << r.best_checkpoint.string() << '\n';
  return 0;
}

// gradcheck --------------------------------------------------------------

int run_gradcheck(const Common& c, const std::string& module, double corrupt) {
  std::vector<std::string> names;
  if (module == "all") names = gradcheck_modules();
  else names = {module};
  GradcheckOptions opts;
  opts.corrupt_scale = corrupt;
  if (c.seed) opts.seed = *c.seed;
  bool ok = true;
  nlohmann::json report = nlohmann::json::array();
  for (const auto& n : names) {
    const auto r = check_module(n, opts, c.seed.value_or(1));
    ok = ok && r.pass();
    std::cout << (r.pass() ? "PASS " : "FAIL ") << n << "  worst relative error " << std::scientific
              << std::setprecision(3) << r.worst() << "  (tolerance " << r.tolerance << ")\n";
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
      entries.push_back({{"param", e.name}, {"max_rel_error", e.max_rel_error}, {"checked", e.checked}, {"pass", e.pass}});
    }
    report.push_back({{"module", n}, {"pass", r.pass()}, {"worst", r.worst()}, {"entries", entries}});
  }
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_file_atomic(fs::path(c.out) / "gradcheck.json", report.dump(2) + "\n");
  }
  return ok ? 0 : kExitAssert;
}

// score ------------------------------------------------------------------

int run_score(const Common& c, const std::string& corpus, const std::string& split, const std::string& fp_path,
              const std::vector<std::string>& model_paths) {
  PipelineConfig cfg = PipelineConfig::from_json(section(c, "score"));
  const auto out = require_out(c);
  if (model_paths.empty()) throw ConfigError("at least one --model is required");
  check_variant(c.variant);
  const auto fp = load_first_pass(load_checkpoint(fp_path));
  std::vector<SecondPassBundle> bundles;
  for (const auto& p : model_paths) bundles.push_back(load_second_pass(load_checkpoint(p)));
  std::vector<NamedModel> models;
  for (const auto& b : bundles) {
    const std::string v = variant_name(b.model.variant());
    if (!c.variant.empty() && v != c.variant) throw ConfigError("checkpoint variant " + v + " does not match --variant " + c.variant);
    models.push_back({v, &b});
  }
  const fs::path root(corpus);
  const CorpusConfig corpus_cfg = CorpusConfig::from_json(nlohmann::json::parse(read_file(root / "corpus.json")));
  if (!section(c, "score").contains("fp_threshold")) {
    const FeatureExtractor fx;
    const auto dev = Dataset::load(load_split(root / "dev"), fx);
    cfg.fp_threshold = calibrate_first_pass(fp, dev, cfg.fp_keep_rate);
    std::cerr << "first-pass gate " << cfg.fp_threshold << " (keeps " << cfg.fp_keep_rate << " of dev positives)\n";
  }
  std::size_t done = 0;
  const auto table = score_corpus(fp, models, load_split(root / split), corpus_cfg, cfg, [&](const std::string& id) {
    if (++done % 200 == 0) std::cerr << "scored " << done << " (" << id << ")\n";
  });
  for (const auto& e : table.errors) std::cerr << "skipped: " << e << '\n';
  write_score_table(table, out);
  std::cout << table.utterances.size() << " utterances, " << table.negatives.size() << " negative files ("
            << std::fixed << std::setprecision(2) << table.negative_seconds() / 3600.0 << " h) -> " << out.string()
            << '\n';
  return 0;
}

// eval -------------------------------------------------------------------

EvalReport evaluate(const ScoreTable& t, const std::string& variant, double target) {
  const auto neg = t.negative_set(variant);
  const auto op = fix_operating_point(neg, target);
  return frr_report(t.positives(variant), neg, op, variant);
}

int run_eval(const Common& c, const std::string& scores, const std::string& compare, int resamples) {
  const auto sec = section(c, "eval");
  if (c.variant.empty()) throw ConfigError("--variant is required");
  check_variant(c.variant);
  if (!compare.empty()) check_variant(compare);
  const auto out = require_out(c);
  const ScoreTable table = read_score_table(scores);
  const double target = sec.value("target_fa_per_hour", table.config.target_fa_per_hour);
  const auto report = evaluate(table, c.variant, target);
  fs::create_directories(out);
  const std::string tsv = report_tsv({report});
  const std::string det = det_csv({report});
  write_file_atomic(out / ("report_" + c.variant + ".tsv"), tsv);
  write_file_atomic(out / ("det_" + c.variant + ".csv"), det);
  std::cout << tsv;
  std::cout << "threshold " << std::setprecision(9) << report.op.threshold << " at " << report.op.fa_per_hour
            << " FA/h (target " << target << ", " << table.negative_seconds() / 3600.0 << " h negatives)\n";

  if (!compare.empty()) {
    std::ostringstream os;
    os << "condition\t" << c.variant << "_minus_" << compare << "\tlo90\thi90\n";
    const auto pa = table.positives(c.variant), pb = table.positives(compare);
    const auto na = table.negative_set(c.variant), nb = table.negative_set(compare);
    const std::uint64_t seed = c.seed.value_or(1);
    for (Condition cond : all_conditions()) {
      if (!report.conditions[static_cast<std::size_t>(cond)].present) continue;
      const auto b = bootstrap_frr_difference(pa, na, pb, nb, target, &cond, resamples, 0.9, seed);
      os << condition_name(cond) << '\t' << b.estimate << '\t' << b.lo << '\t' << b.hi << '\n';
    }
    const auto b = bootstrap_frr_difference(pa, na, pb, nb, target, nullptr, resamples, 0.9, seed);
    os << "overall\t" << b.estimate << '\t' << b.lo << '\t' << b.hi << '\n';
    write_file_atomic(out / ("bootstrap_" + c.variant + "_" + compare + ".tsv"), os.str());
    std::cout << os.str();
  }

  if (!c.check) return 0;
  auto problems = check_report(report);
  if (report.op.fa_per_hour > target) problems.push_back("operating point exceeds the FA target");
  const auto again = evaluate(read_score_table(scores), c.variant, target);
  if (report_tsv({again}) != tsv || det_csv({again}) != det) problems.push_back("re-run differs");
  for (const auto& p : problems) std::cout << "ASSERT FAIL: " << p << '\n';
  if (problems.empty()) std::cout << "ASSERT PASS: DET monotone, FRR in [0,1], weighted overall, deterministic\n";
  return problems.empty() ? 0 : kExitAssert;
}

// inspect ----------------------------------------------------------------

void print_counts(const std::string& title, const std::vector<std::pair<std::string, Index>>& counts) {
  std::cout << title << '\n';
  for (const auto& [name, n] : counts) std::cout << "  " << std::left << std::setw(16) << name << std::right << n << '\n';
}

int run_inspect(const Common& c, const std::string& ckpt_path) {
  check_variant(c.variant);
  check_preset(c.preset);
  if (!ckpt_path.empty()) {
    const auto ck = load_checkpoint(ckpt_path);
    std::cout << "arch " << ck.arch << "  format " << ck.format_version << "  tensors " << ck.entries.size() << '\n';
    if (ck.arch == "fp.dnn") {
      auto fp = load_first_pass(ck);
      ParamList ps;
      fp.dnn.collect(ps);
      print_counts("first pass", {{"total", count_scalars(ps)}});
    } else {
      const auto sp = load_second_pass(ck);
      const std::string v = variant_name(sp.model.variant());
      if (!c.variant.empty() && v != c.variant) throw ConfigError("checkpoint variant " + v + " does not match --variant " + c.variant);
      std::cout << "config " << sp.model.config().to_json().dump() << '\n';
      print_counts(v, sp.model.count_params());
    }
    if (!ck.meta.empty()) std::cout << "meta keys:";
    for (const auto& [k, _] : ck.meta.items()) std::cout << ' ' << k;
    std::cout << '\n';
    return 0;
  }
  const std::string preset = c.preset.empty() ? "paper" : c.preset;
  std::vector<std::string> variants{"baseline", "tac", "modtac"};
  if (!c.variant.empty()) variants = {c.variant};
  for (const auto& v : variants) {
    const SecondPassModel m(SecondPassConfig::preset(preset, parse_variant(v)));
    print_counts(v + " (" + preset + ")", m.count_params());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vtmc: multichannel keyword verification toolkit"};
  app.require_subcommand(1);
  Common c;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "JSON config with per-subcommand sections")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--variant", c.variant, "baseline | tac | modtac");
    sub->add_option("--preset", c.preset, "desk | paper");
    sub->add_option("--out", c.out, "output directory");
    sub->add_flag("--assert", c.check, "exit 2 when checks fail");
  };

  auto* synth = app.add_subcommand("synth", "render the synthetic corpus");
  add_common(synth);
  bool smoke = false;
  synth->add_flag("--smoke", smoke, "small corpus for quick runs");

  auto* trn = app.add_subcommand("train", "train a model (variant firstpass trains the first pass)");
  add_common(trn);
  std::string corpus;
  int epochs = 0;
  trn->add_option("--corpus", corpus, "corpus directory")->required();
  trn->add_option("--epochs", epochs, "override the epoch count");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(grad);
  std::string module = "all";
  double corrupt = 1.0;
  grad->add_option("--module", module, "module name or all");
  grad->add_option("--corrupt", corrupt, "scale analytic gradients (fault injection)");

  auto* score = app.add_subcommand("score", "two-stage scoring of a corpus split");
  add_common(score);
  std::string split = "eval", fp_path;
  std::vector<std::string> model_paths;
  score->add_option("--corpus", corpus, "corpus directory")->required();
  score->add_option("--split", split, "split to score");
  score->add_option("--first-pass", fp_path, "first-pass checkpoint")->required();
  score->add_option("--model", model_paths, "second-pass checkpoint (repeatable)");

  auto* ev = app.add_subcommand("eval", "fix the operating point and report FRR");
  add_common(ev);
  std::string scores, compare;
  int resamples = 1000;
  ev->add_option("--scores", scores, "directory written by score")->required();
  ev->add_option("--compare", compare, "second variant for a bootstrap FRR difference");
  ev->add_option("--resamples", resamples, "bootstrap resamples");

  auto* insp = app.add_subcommand("inspect", "checkpoint summary and parameter counts");
  add_common(insp);
  std::string ckpt;
  insp->add_option("checkpoint", ckpt, "checkpoint file (omit to count a preset)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) c.seed = seed;
  }

  try {
    if (*synth) return run_synth(c, smoke);
    if (*trn) return run_train(c, corpus, epochs);
    if (*grad) return run_gradcheck(c, module, corrupt);
    if (*score) return run_score(c, corpus, split, fp_path, model_paths);
    if (*ev) return run_eval(c, scores, compare, resamples);
    if (*insp) return run_inspect(c, ckpt);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
