// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/firstpass/dnn.hpp"

#include "vtmc/ctc/ctc.hpp"

namespace vtmc {

FirstPassDnn::FirstPassDnn(const FirstPassConfig& config, const std::string& prefix) : config_(config) {
  if (config.layers < 1 || config.hidden < 1) throw ConfigError("first-pass DNN needs at least one hidden layer");
  Index in = config.input_dim;
  for (int i = 0; i < config.layers; ++i) {
    hidden_.emplace_back(prefix + ".h" + std::to_string(i), in, config.hidden);
    in = config.hidden;
  }
  output_ = LinearLayer(prefix + ".out", in, config.classes);
}

void FirstPassDnn::init(Rng& rng) {
  for (auto& l : hidden_) l.init(rng);
  output_.init(rng);
}

void FirstPassDnn::collect(ParamList& out) {
  for (auto& l : hidden_) l.collect(out);
  output_.collect(out);
}

Tape::Var FirstPassDnn::logits(Tape& tape, Tape::Var x) const {
  if (tape.value(x).cols() != config_.input_dim) throw DimensionError("first-pass DNN: feature dim mismatch");
  for (const auto& l : hidden_) x = tape.relu(l.forward(tape, x));
  return output_.forward(tape, x);
}

Matrix FirstPassDnn::posteriors(const Matrix& features) const {
  if (features.cols() != config_.input_dim) throw DimensionError("first-pass DNN: feature dim mismatch");
  Matrix x = features;
  for (const auto& l : hidden_) x = linear_forward(l, x).cwiseMax(0.0);
  return log_softmax_rows(linear_forward(output_, x)).array().exp();
}

Matrix dnn_posteriors(const FirstPassDnn& model, const Matrix& features) { return model.posteriors(features); }

}  // namespace vtmc
