// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/evalharness/operating_point.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace vtmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Events sorted by (file, time); FA counting walks them once.
std::vector<NegativeEvent> sorted_events(const NegativeSet& neg) {
  std::vector<NegativeEvent> ev = neg.events;
  std::stable_sort(ev.begin(), ev.end(), [](const NegativeEvent& a, const NegativeEvent& b) {
    return a.file != b.file ? a.file < b.file : a.time < b.time;
  });
  return ev;
}

std::size_t count_sorted(const std::vector<NegativeEvent>& ev, double theta, double dedup) {
  std::size_t n = 0;
  int file = -1;
  double last = -kInf;
  for (const auto& e : ev) {
    if (!(e.score > theta)) continue;
    if (e.file != file) {
      file = e.file;
      last = -kInf;
    }
    if (e.time - last > dedup) {
      ++n;
      last = e.time;
    }
  }
  return n;
}

OperatingPoint fix_sorted(const std::vector<NegativeEvent>& ev, double hours, double dedup, double target) {
  if (!(hours > 0)) throw InsufficientDataError("no negative audio");
  if (hours * target < 1.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.3f h of negatives cannot resolve %.4g FA/h (need at least %.3f h)", hours, target,
                  1.0 / target);
    throw InsufficientDataError(buf);
  }
  std::vector<double> cand;
  cand.reserve(ev.size() + 1);
  cand.push_back(-kInf);
  for (const auto& e : ev) {
    if (std::isfinite(e.score)) cand.push_back(e.score);
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  // FA count is non-increasing in theta; find the first candidate that meets the target.
  std::size_t lo = 0, hi = cand.size() - 1;
  const auto ok = [&](std::size_t i) { return static_cast<double>(count_sorted(ev, cand[i], dedup)) / hours <= target; };
  if (!ok(hi)) throw InsufficientDataError("no threshold reaches the target FA rate");
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (ok(mid)) hi = mid;
    else lo = mid + 1;
  }
  OperatingPoint op;
  op.threshold = cand[lo];
  op.fa_per_hour = static_cast<double>(count_sorted(ev, cand[lo], dedup)) / hours;
  return op;
}

}  // namespace

double NegativeSet::hours() const { return std::accumulate(file_seconds.begin(), file_seconds.end(), 0.0) / 3600.0; }

std::size_t count_false_alarms(const NegativeSet& neg, double theta) {
  return count_sorted(sorted_events(neg), theta, neg.dedup_seconds);
}

double fa_per_hour(const NegativeSet& neg, double theta) {
  const double h = neg.hours();
  if (!(h > 0)) throw InsufficientDataError("no negative audio");
  return static_cast<double>(count_false_alarms(neg, theta)) / h;
}

OperatingPoint fix_operating_point(const NegativeSet& neg, double target_fa_per_hour) {
  OperatingPoint op = fix_sorted(sorted_events(neg), neg.hours(), neg.dedup_seconds, target_fa_per_hour);
  op.source = neg.id;
  return op;
}

ConditionFrr frr_at(const std::vector<PositiveScore>& pos, double theta, const Condition* only) {
  ConditionFrr r;
  for (const auto& p : pos) {
    if (only && p.condition != *only) continue;
    ++r.count;
    r.rejected += !(p.score > theta);
  }
  r.present = r.count > 0;
  r.frr = r.present ? static_cast<double>(r.rejected) / static_cast<double>(r.count) : 0.0;
  return r;
}

EvalReport frr_report(const std::vector<PositiveScore>& pos, const NegativeSet& neg, const OperatingPoint& op,
                      const std::string& variant, std::size_t max_det_points) {
  EvalReport r;
  r.variant = variant;
  r.op = op;
  for (Condition c : all_conditions()) r.conditions[static_cast<std::size_t>(c)] = frr_at(pos, op.threshold, &c);
  r.overall = frr_at(pos, op.threshold);

  std::vector<double> th{-kInf, kInf};
  for (const auto& p : pos) {
    if (std::isfinite(p.score)) th.push_back(p.score);
  }
  for (const auto& e : neg.events) {
    if (std::isfinite(e.score)) th.push_back(e.score);
  }
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  if (max_det_points >= 2 && th.size() > max_det_points) {
    std::vector<double> sub;
    for (std::size_t k = 0; k < max_det_points; ++k) sub.push_back(th[k * (th.size() - 1) / (max_det_points - 1)]);
    th = std::move(sub);
  }
  const auto ev = sorted_events(neg);
  const double hours = neg.hours();
  for (double t : th) {
    DetPoint d;
    d.threshold = t;
    d.fa_per_hour = hours > 0 ? static_cast<double>(count_sorted(ev, t, neg.dedup_seconds)) / hours : 0.0;
    d.frr = frr_at(pos, t).frr;
    r.det.push_back(d);
  }
  return r;
}

std::string report_tsv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "variant";
  for (Condition c : all_conditions()) os << '\t' << condition_name(c);
  os << "\toverall\tthreshold\tfa_per_hour\tpositives\n";
  char buf[64];
  for (const auto& r : reports) {
    os << r.variant;
    for (const auto& c : r.conditions) {
      if (c.present) {
        std::snprintf(buf, sizeof buf, "%.2f", 100.0 * c.frr);
        os << '\t' << buf;
      } else {
        os << "\tabsent";
      }
    }
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * r.overall.frr);
    os << '\t' << buf;
    std::snprintf(buf, sizeof buf, "%.6g", r.op.threshold);
    os << '\t' << buf;
    std::snprintf(buf, sizeof buf, "%.4f", r.op.fa_per_hour);
    os << '\t' << buf << '\t' << r.overall.count << '\n';
  }
  return os.str();
}

std::string det_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "variant,threshold,fa_per_hour,frr\n";
  char buf[128];
  for (const auto& r : reports) {
    for (const auto& d : r.det) {
      std::snprintf(buf, sizeof buf, ",%.9g,%.9g,%.9g\n", d.threshold, d.fa_per_hour, d.frr);
      os << r.variant << buf;
    }
  }
  return os.str();
}

std::vector<std::string> check_report(const EvalReport& r) {
  std::vector<std::string> bad;
  const auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  std::size_t count = 0, rejected = 0;
  for (Condition c : all_conditions()) {
    const auto& cf = r.conditions[static_cast<std::size_t>(c)];
    if (!in01(cf.frr)) bad.push_back(r.variant + ": FRR outside [0,1] for " + condition_name(c));
    count += cf.count;
    rejected += cf.rejected;
  }
  if (!in01(r.overall.frr)) bad.push_back(r.variant + ": overall FRR outside [0,1]");
  double weighted = 0;
  for (const auto& cf : r.conditions) weighted += static_cast<double>(cf.count) * cf.frr;
  if (count != r.overall.count || rejected != r.overall.rejected ||
      (count > 0 && std::abs(weighted / static_cast<double>(count) - r.overall.frr) > 1e-12)) {
    bad.push_back(r.variant + ": overall FRR is not the count-weighted mean of the conditions");
  }
  if (r.op.fa_per_hour < 0) bad.push_back(r.variant + ": negative FA rate");
  for (std::size_t i = 1; i < r.det.size(); ++i) {
    const auto& a = r.det[i - 1];
    const auto& b = r.det[i];
    if (!(b.threshold >= a.threshold) || b.fa_per_hour > a.fa_per_hour || b.frr < a.frr) {
      bad.push_back(r.variant + ": DET not monotone at sample " + std::to_string(i));
      break;
    }
  }
  for (const auto& d : r.det) {
    if (!in01(d.frr)) {
      bad.push_back(r.variant + ": DET FRR outside [0,1]");
      break;
    }
  }
  return bad;
}

BootstrapResult bootstrap_frr_difference(const std::vector<PositiveScore>& pos_a, const NegativeSet& neg_a,
                                         const std::vector<PositiveScore>& pos_b, const NegativeSet& neg_b,
                                         double target, const Condition* only, int resamples, double level,
                                         std::uint64_t seed) {
  if (pos_a.size() != pos_b.size() || neg_a.file_seconds.size() != neg_b.file_seconds.size()) {
    throw ConfigError("bootstrap needs paired score sets");
  }
  BootstrapResult out;
  out.resamples = resamples;
  {
    const double ta = fix_operating_point(neg_a, target).threshold;
    const double tb = fix_operating_point(neg_b, target).threshold;
    out.estimate = frr_at(pos_a, ta, only).frr - frr_at(pos_b, tb, only).frr;
  }
  std::vector<std::size_t> pos_idx;
  for (std::size_t i = 0; i < pos_a.size(); ++i) {
    if (!only || pos_a[i].condition == *only) pos_idx.push_back(i);
  }
  const std::size_t files = neg_a.file_seconds.size();
  std::vector<std::vector<NegativeEvent>> by_file_a(files), by_file_b(files);
  for (const auto& e : sorted_events(neg_a)) by_file_a[static_cast<std::size_t>(e.file)].push_back(e);
  for (const auto& e : sorted_events(neg_b)) by_file_b[static_cast<std::size_t>(e.file)].push_back(e);

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_file(0, files - 1);
  std::uniform_int_distribution<std::size_t> pick_pos(0, pos_idx.empty() ? 0 : pos_idx.size() - 1);
  std::vector<double> diffs;
  diffs.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    std::vector<NegativeEvent> ea, eb;
    double seconds = 0;
    for (std::size_t k = 0; k < files; ++k) {
      const std::size_t f = pick_file(rng);
      seconds += neg_a.file_seconds[f];
      for (auto e : by_file_a[f]) {
        e.file = static_cast<int>(k);
        ea.push_back(e);
      }
      for (auto e : by_file_b[f]) {
        e.file = static_cast<int>(k);
        eb.push_back(e);
      }
    }
    const double hours = seconds / 3600.0;
    double ta, tb;
    try {
      ta = fix_sorted(ea, hours, neg_a.dedup_seconds, target).threshold;
      tb = fix_sorted(eb, hours, neg_b.dedup_seconds, target).threshold;
    } catch (const InsufficientDataError&) {
      continue;
    }
    std::size_t ra = 0, rb = 0;
    for (std::size_t k = 0; k < pos_idx.size(); ++k) {
      const std::size_t i = pos_idx[pick_pos(rng)];
      ra += !(pos_a[i].score > ta);
      rb += !(pos_b[i].score > tb);
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, pos_idx.size()));
    diffs.push_back(static_cast<double>(ra) / n - static_cast<double>(rb) / n);
  }
  if (diffs.empty()) throw InsufficientDataError("every bootstrap resample was unusable");
  std::sort(diffs.begin(), diffs.end());
  const double tail = (1.0 - level) / 2.0;
  const auto q = [&](double p) {
    const double pos = p * static_cast<double>(diffs.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(i);
    return i + 1 < diffs.size() ? diffs[i] * (1 - f) + diffs[i + 1] * f : diffs[i];
  };
  out.lo = q(tail);
  out.hi = q(1.0 - tail);
  out.resamples = static_cast<int>(diffs.size());
  return out;
}

}  // namespace vtmc
