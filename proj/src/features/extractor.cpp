// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/features/extractor.hpp"

#include <cmath>

namespace vtmc {

nlohmann::json FeatureConfig::to_json() const {
  return {{"sample_rate", sample_rate}, {"win", win},           {"hop", hop},
          {"n_mels", n_mels},           {"fmin", fmin},         {"fmax", fmax},
          {"log_floor", log_floor},     {"left_context", left_context}, {"right_context", right_context}};
}

FeatureConfig FeatureConfig::from_json(const nlohmann::json& j) {
  FeatureConfig c;
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.win = j.value("win", c.win);
  c.hop = j.value("hop", c.hop);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.fmin = j.value("fmin", c.fmin);
  c.fmax = j.value("fmax", c.fmax);
  c.log_floor = j.value("log_floor", c.log_floor);
  c.left_context = j.value("left_context", c.left_context);
  c.right_context = j.value("right_context", c.right_context);
  if (c.sample_rate != kSampleRate) throw ConfigError("features: sample_rate must be 16000");
  return c;
}

void FeatureNormalizer::accumulate(const Matrix& mel) {
  if (sum_.size() == 0) {
    sum_ = Eigen::VectorXd::Zero(mel.cols());
    sumsq_ = Eigen::VectorXd::Zero(mel.cols());
  }
  if (sum_.size() != mel.cols()) throw DimensionError("normalizer: width changed between batches");
  sum_ += mel.colwise().sum().transpose();
  sumsq_ += mel.array().square().matrix().colwise().sum().transpose();
  count_ += static_cast<double>(mel.rows());
}

void FeatureNormalizer::finalize() {
  if (count_ < 2) throw EmptyInputError("normalizer: fewer than two frames accumulated");
  const Eigen::VectorXd mu = sum_ / count_;
  const Eigen::VectorXd var = (sumsq_ / count_ - mu.cwiseProduct(mu)).cwiseMax(1e-8);
  mean_ = mu.transpose();
  inv_std_ = var.cwiseSqrt().cwiseInverse().transpose();
}

void FeatureNormalizer::apply(Matrix& mel) const {
  if (!ready()) return;
  if (mel.cols() != mean_.cols()) throw DimensionError("normalizer: width mismatch");
  mel.rowwise() -= mean_.row(0);
  mel.array().rowwise() *= inv_std_.row(0).array();
}

nlohmann::json FeatureNormalizer::to_json() const {
  std::vector<double> m(mean_.data(), mean_.data() + mean_.size());
  std::vector<double> s(inv_std_.data(), inv_std_.data() + inv_std_.size());
  return {{"mean", m}, {"inv_std", s}};
}

FeatureNormalizer FeatureNormalizer::from_json(const nlohmann::json& j) {
  FeatureNormalizer n;
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto s = j.at("inv_std").get<std::vector<double>>();
  if (m.size() != s.size()) throw ConfigError("normalizer: mean/inv_std length mismatch");
  n.mean_ = Eigen::Map<const Matrix>(m.data(), 1, static_cast<Index>(m.size()));
  n.inv_std_ = Eigen::Map<const Matrix>(s.data(), 1, static_cast<Index>(s.size()));
  return n;
}

FeatureExtractor::FeatureExtractor(FeatureConfig config)
    : config_(config), bank_(config.n_mels, config.win, config.sample_rate, config.fmin, config.fmax) {}

Matrix FeatureExtractor::logmel(const AudioClip& clip) const {
  return vtmc::logmel(stft(clip, config_.win, config_.hop), bank_, config_.log_floor);
}

FeatureSequence FeatureExtractor::stack(Matrix mel, const FeatureNormalizer* norm) const {
  if (norm) norm->apply(mel);
  FeatureSequence fs;
  fs.frames = stack_context(mel, config_.left_context, config_.right_context);
  fs.frame_shift = config_.frame_shift();
  return fs;
}

FeatureSequence FeatureExtractor::features(const AudioClip& clip, const FeatureNormalizer* norm) const {
  return stack(logmel(clip), norm);
}

}  // namespace vtmc
