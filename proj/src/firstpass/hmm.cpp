// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/firstpass/hmm.hpp"

#include <algorithm>
#include <cmath>

namespace vtmc {

nlohmann::json HmmConfig::to_json() const {
  return {{"keyword_classes", keyword_classes},
          {"states_per_phoneme", states_per_phoneme},
          {"keyword_self_loop", keyword_self_loop},
          {"keyword_advance", 1.0 - keyword_self_loop},
          {"background_self_loop", background_self_loop},
          {"silence_class", silence_class},
          {"other_class", other_class},
          {"posterior_floor", posterior_floor}};
}

HmmConfig HmmConfig::from_json(const nlohmann::json& j) {
  HmmConfig c;
  c.keyword_classes = j.at("keyword_classes").get<std::vector<int>>();
  c.states_per_phoneme = j.value("states_per_phoneme", c.states_per_phoneme);
  c.keyword_self_loop = j.value("keyword_self_loop", c.keyword_self_loop);
  if (j.contains("keyword_advance")) {
    const double adv = j.at("keyword_advance").get<double>();
    if (std::abs(adv + c.keyword_self_loop - 1.0) > 1e-12) {
      throw ConfigError("hmm: keyword self-loop and advance probabilities must sum to 1");
    }
  }
  c.background_self_loop = j.value("background_self_loop", c.background_self_loop);
  c.silence_class = j.value("silence_class", c.silence_class);
  c.other_class = j.value("other_class", c.other_class);
  c.posterior_floor = j.value("posterior_floor", c.posterior_floor);
  return c;
}

KeywordHmm::KeywordHmm(HmmConfig config) : config_(std::move(config)) {
  if (config_.keyword_classes.empty()) throw ConfigError("hmm: keyword has no phonemes");
  if (config_.states_per_phoneme < 1) throw ConfigError("hmm: states_per_phoneme must be >= 1");
  if (!(config_.keyword_self_loop > 0 && config_.keyword_self_loop < 1)) {
    throw ConfigError("hmm: keyword self-loop must lie in (0, 1)");
  }
  if (!(config_.background_self_loop > 0 && config_.background_self_loop <= 1)) {
    throw ConfigError("hmm: background self-loop must lie in (0, 1]");
  }
  if (!(config_.posterior_floor > 0)) throw ConfigError("hmm: posterior floor must be positive");
  for (int c : config_.keyword_classes) {
    if (c < 0 || c >= kFirstPassClasses) throw ConfigError("hmm: keyword class out of range");
    for (int k = 0; k < config_.states_per_phoneme; ++k) state_class_.push_back(c);
  }
  log_self_ = std::log(config_.keyword_self_loop);
  log_advance_ = std::log(1.0 - config_.keyword_self_loop);
  log_bg_self_ = std::log(config_.background_self_loop);
}

double KeywordHmm::background(const double* row) const {
  const double p = std::max({row[config_.silence_class], row[config_.other_class], config_.posterior_floor});
  return std::log(p) + log_bg_self_;
}

double KeywordHmm::emission_llr(Index s, const double* row) const {
  return std::log(std::max(row[state_class(s)], config_.posterior_floor)) - background(row);
}

StreamingKeywordDecoder::StreamingKeywordDecoder(const KeywordHmm& hmm) : hmm_(&hmm) { reset(); }

void StreamingKeywordDecoder::reset() {
  const auto n = static_cast<std::size_t>(hmm_->num_states());
  delta_.assign(n, -std::numeric_limits<double>::infinity());
  start_.assign(n, 0);
  next_delta_.assign(n, 0);
  next_start_.assign(n, 0);
  t_ = 0;
  best_ = TriggerResult{};
}

StreamingKeywordDecoder::Frame StreamingKeywordDecoder::push(const double* row) {
  const auto n = delta_.size();
  const double bg = hmm_->background(row);
  for (std::size_t s = 0; s < n; ++s) {
    const double emit =
        std::log(std::max(row[hmm_->state_class(static_cast<Index>(s))], hmm_->config().posterior_floor)) - bg;
    double best = delta_[s] + hmm_->log_self();
    Index from = start_[s];
    if (s == 0) {
      // Entering the keyword from the background costs nothing relative to it.
      if (!(best >= 0.0)) {
        best = 0.0;
        from = t_;
      }
    } else {
      const double adv = delta_[s - 1] + hmm_->log_advance();
      if (adv > best) {
        best = adv;
        from = start_[s - 1];
      }
    }
    next_delta_[s] = best + emit;
    next_start_[s] = from;
  }
  delta_.swap(next_delta_);
  start_.swap(next_start_);

  Frame f;
  f.llr = delta_.back();
  f.start = start_.back();
  f.score = f.llr / static_cast<double>(t_ - f.start + 1);
  if (f.score > best_.score) {
    best_.score = f.score;
    best_.start = f.start;
    best_.end = t_;
  }
  ++t_;
  return f;
}

TriggerResult hmm_decode_stream(const KeywordHmm& hmm, const Matrix& posteriors) {
  if (posteriors.rows() == 0) throw EmptyInputError("hmm_decode_stream: no frames");
  if (posteriors.cols() < kFirstPassClasses) throw DimensionError("hmm_decode_stream: posterior width");
  StreamingKeywordDecoder dec(hmm);
  for (Index t = 0; t < posteriors.rows(); ++t) dec.push(posteriors.row(t).data());
  return dec.best();
}

TriggerResult select_channel(const std::vector<TriggerResult>& results) {
  if (results.empty()) throw EmptyInputError("select_channel: no channels");
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].score > results[best].score) best = i;
  }
  TriggerResult r = results[best];
  r.channel = static_cast<int>(best);
  return r;
}

}  // namespace vtmc
