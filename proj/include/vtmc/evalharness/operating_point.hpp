// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "vtmc/simcorpus/scene.hpp"

namespace vtmc {

/// A negative-audio window forwarded to the second pass.
struct NegativeEvent {
  int file = 0;       // index into the negative file list
  double time = 0;    // seconds from file start
  double score = -std::numeric_limits<double>::infinity();
};

/// Scored negative audio: events plus the scanned duration of every file.
struct NegativeSet {
  std::string id;
  std::vector<double> file_seconds;
  std::vector<NegativeEvent> events;
  double dedup_seconds = 2.0;

  double hours() const;
};

/// False alarms at threshold theta: events with score > theta, keeping only
/// those more than dedup_seconds after the previous counted alarm in the same file.
std::size_t count_false_alarms(const NegativeSet& neg, double theta);
double fa_per_hour(const NegativeSet& neg, double theta);

struct OperatingPoint {
  double threshold = 0;
  double fa_per_hour = 0;
  std::string source;
};

/// Smallest threshold whose FA rate is at most `target_fa_per_hour`, searched
/// over -inf and every event score. InsufficientDataError when hours <= 0 or
/// hours * target < 1 (a rate that small cannot be resolved).
OperatingPoint fix_operating_point(const NegativeSet& neg, double target_fa_per_hour);

struct PositiveScore {
  Condition condition = Condition::Quiet;
  double score = -std::numeric_limits<double>::infinity();
};

struct ConditionFrr {
  bool present = false;
  std::size_t count = 0;
  std::size_t rejected = 0;
  double frr = 0;
};

struct DetPoint {
  double threshold = 0;
  double fa_per_hour = 0;
  double frr = 0;
};

struct EvalReport {
  std::string variant;
  OperatingPoint op;
  std::array<ConditionFrr, kNumConditions> conditions{};
  ConditionFrr overall;
  std::vector<DetPoint> det;
};

/// A positive is rejected when its score is not above the threshold.
ConditionFrr frr_at(const std::vector<PositiveScore>& pos, double theta, const Condition* only = nullptr);

/// FRR per condition and overall at `op`, plus a DET sweep over every distinct score.
EvalReport frr_report(const std::vector<PositiveScore>& pos, const NegativeSet& neg, const OperatingPoint& op,
                      const std::string& variant, std::size_t max_det_points = 400);

/// Table-1-shaped rows (FRR in percent, "absent" for empty conditions).
std::string report_tsv(const std::vector<EvalReport>& reports);
/// variant,threshold,fa_per_hour,frr
std::string det_csv(const std::vector<EvalReport>& reports);

/// Identity checks; returns one message per violation.
std::vector<std::string> check_report(const EvalReport& r);

struct BootstrapResult {
  double estimate = 0;
  double lo = 0;
  double hi = 0;
  int resamples = 0;
};

/// Paired bootstrap of FRR(a) - FRR(b) on one condition (all when null).
/// Each resample draws negative files and positives with replacement,
/// re-fixes both operating points, and recomputes the FRRs. The interval is
/// the central `level` percentile range.
BootstrapResult bootstrap_frr_difference(const std::vector<PositiveScore>& pos_a, const NegativeSet& neg_a,
                                         const std::vector<PositiveScore>& pos_b, const NegativeSet& neg_b,
                                         double target_fa_per_hour, const Condition* only, int resamples,
                                         double level, std::uint64_t seed);

}  // namespace vtmc
