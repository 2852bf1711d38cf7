// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/secondpass/model.hpp"

namespace vtmc {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::Tac: return "tac";
    case Variant::ModTac: return "modtac";
    case Variant::Concat: return "concat";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "baseline") return Variant::Baseline;
  if (name == "tac") return Variant::Tac;
  if (name == "modtac") return Variant::ModTac;
  if (name == "concat") return Variant::Concat;
  throw ConfigError("unknown variant '" + name + "' (expected baseline|tac|modtac)");
}

bool is_multichannel(Variant v) { return v != Variant::Baseline; }

SecondPassConfig SecondPassConfig::desk(Variant v) {
  SecondPassConfig c;
  c.variant = v;
  return c;
}

SecondPassConfig SecondPassConfig::paper(Variant v) {
  SecondPassConfig c;
  c.variant = v;
  c.model_dim = 256;
  c.blocks = 6;
  c.heads = 4;
  c.ff_dim = 1024;
  c.tac_hidden = 3 * 256;
  return c;
}

SecondPassConfig SecondPassConfig::tiny(Variant v) {
  SecondPassConfig c;
  c.variant = v;
  c.model_dim = 8;
  c.blocks = 1;
  c.heads = 2;
  c.ff_dim = 16;
  c.tac_hidden = 8;
  return c;
}

SecondPassConfig SecondPassConfig::preset(const std::string& name, Variant v) {
  if (name == "desk") return desk(v);
  if (name == "paper") return paper(v);
  if (name == "tiny") return tiny(v);
  throw ConfigError("unknown preset '" + name + "' (expected desk|paper|tiny)");
}

nlohmann::json SecondPassConfig::to_json() const {
  return {{"variant", variant_name(variant)}, {"input_dim", input_dim},   {"model_dim", model_dim},
          {"blocks", blocks},                 {"heads", heads},           {"ff_dim", ff_dim},
          {"tac_hidden", tac_hidden},         {"tac_blocks", tac_blocks}, {"outputs", outputs},
          {"pool_includes_sc", pool_includes_sc}, {"dropout", dropout},   {"concat_channels", concat_channels}};
}

SecondPassConfig SecondPassConfig::from_json(const nlohmann::json& j) {
  SecondPassConfig c;
  c.variant = parse_variant(j.value("variant", std::string("baseline")));
  c.input_dim = j.value("input_dim", c.input_dim);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.blocks = j.value("blocks", c.blocks);
  c.heads = j.value("heads", c.heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.tac_hidden = j.value("tac_hidden", c.tac_hidden);
  c.tac_blocks = j.value("tac_blocks", c.tac_blocks);
  c.outputs = j.value("outputs", c.outputs);
  c.pool_includes_sc = j.value("pool_includes_sc", c.pool_includes_sc);
  c.dropout = j.value("dropout", c.dropout);
  c.concat_channels = j.value("concat_channels", c.concat_channels);
  return c;
}

namespace {

std::string tac_prefix(int i) { return i == 0 ? "sp.tac" : "sp.tac" + std::to_string(i); }

}  // namespace

SecondPassModel::SecondPassModel(const SecondPassConfig& config) : config_(config) {
  if (config.blocks < 0 || config.tac_blocks < 1) throw ConfigError("second pass: bad block counts");
  if (config.variant == Variant::Tac) {
    for (int i = 0; i < config.tac_blocks; ++i) tac.emplace_back(tac_prefix(i), config.input_dim, config.tac_hidden);
  } else if (config.variant == Variant::ModTac) {
    for (int i = 0; i < config.tac_blocks; ++i) {
      modtac.emplace_back(tac_prefix(i), config.input_dim, config.tac_hidden);
    }
  }
  const Index proj_in =
      config.variant == Variant::Concat ? config.input_dim * config.concat_channels : config.input_dim;
  input_proj = LinearLayer("sp.in", proj_in, config.model_dim);
  for (int b = 0; b < config.blocks; ++b) {
    blocks.emplace_back("sp.enc." + std::to_string(b), config.model_dim, config.heads, config.ff_dim);
  }
  final_norm = LayerNorm("sp.norm", config.model_dim);
  output = LinearLayer("sp.out", config.model_dim, config.outputs);
}

void SecondPassModel::init(Rng& rng) {
  for (auto& t : tac) t.init(rng);
  for (auto& t : modtac) t.init(rng);
  input_proj.init(rng);
  for (auto& b : blocks) b.init(rng);
  output.init(rng);
}

ParamList SecondPassModel::params() {
  ParamList out;
  for (auto& t : tac) t.collect(out);
  for (auto& t : modtac) t.collect(out);
  input_proj.collect(out);
  for (auto& b : blocks) b.collect(out);
  final_norm.collect(out);
  output.collect(out);
  return out;
}

Tape::Var SecondPassModel::encode(Tape& tape, const MultichannelBatch& batch, const ForwardContext& ctx) const {
  Tape::Var pooled;
  switch (config_.variant) {
    case Variant::Baseline: {
      if (batch.selected.size() == 0) throw ConfigError("baseline model needs the selected channel");
      pooled = tape.input(batch.selected);
      break;
    }
    case Variant::Tac: {
      if (batch.channels.empty()) throw ConfigError("tac model needs the multichannel input");
      batch.validate(false);
      const auto n = static_cast<Index>(batch.channels.size());
      Tape::Var z = stack_channels(tape, batch.channels);
      for (const auto& block : tac) z = block.forward(tape, z, n);
      pooled = tape.mean_blocks(z, n);
      break;
    }
    case Variant::ModTac: {
      if (batch.channels.empty() || batch.selected.size() == 0) {
        throw ConfigError("modtac model needs the multichannel input and the selected channel");
      }
      batch.validate(true);
      const auto n = static_cast<Index>(batch.channels.size());
      Tape::Var z = stack_channels(tape, batch.channels);
      Tape::Var sc = tape.input(batch.selected);
      for (const auto& block : modtac) {
        const ModTacBlock::Output o = block.forward(tape, z, n, sc);
        z = o.channels;
        sc = o.selected;
      }
      pooled = config_.pool_includes_sc ? tape.mean_blocks(tape.vstack({z, sc}), n + 1) : tape.mean_blocks(z, n);
      break;
    }
    case Variant::Concat: {
      if (static_cast<int>(batch.channels.size()) != config_.concat_channels) {
        throw ConfigError("concat ablation expects exactly " + std::to_string(config_.concat_channels) + " channels");
      }
      batch.validate(false);
      std::vector<Tape::Var> parts;
      for (const Matrix& c : batch.channels) parts.push_back(tape.input(c));
      pooled = tape.hstack(parts);
      break;
    }
  }
  if (tape.value(pooled).rows() == 0) throw EmptyInputError("second pass: no frames");
  Tape::Var x = input_proj.forward(tape, pooled);
  x = tape.add(x, tape.input(sinusoidal_positions(tape.value(x).rows(), config_.model_dim)));
  x = apply_dropout(tape, x, ctx);
  for (const auto& b : blocks) x = b.forward(tape, x, ctx);
  return output.forward(tape, final_norm.forward(tape, x));
}

Matrix SecondPassModel::encode(const MultichannelBatch& batch, std::vector<Matrix>* attention) const {
  Tape tape(false);
  ForwardContext ctx;
  ctx.attention = attention;
  return tape.value(encode(tape, batch, ctx));
}

Matrix SecondPassModel::encode(const FeatureSequence& single) const {
  if (config_.variant != Variant::Baseline) throw ConfigError("single-channel input given to a multichannel model");
  MultichannelBatch b;
  b.selected = single.frames;
  return encode(b);
}

std::vector<std::pair<std::string, Index>> SecondPassModel::count_params() const {
  auto& self = const_cast<SecondPassModel&>(*this);
  std::vector<std::pair<std::string, Index>> out;
  Index total = 0;
  auto add = [&](const std::string& name, ParamList ps) {
    const Index n = count_scalars(ps);
    out.emplace_back(name, n);
    total += n;
  };
  for (std::size_t i = 0; i < tac.size(); ++i) {
    ParamList ps;
    self.tac[i].collect(ps);
    add(tac_prefix(static_cast<int>(i)), ps);
  }
  for (std::size_t i = 0; i < modtac.size(); ++i) {
    ParamList ps;
    self.modtac[i].collect(ps);
    add(tac_prefix(static_cast<int>(i)), ps);
  }
  {
    ParamList ps;
    self.input_proj.collect(ps);
    add("sp.in", ps);
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    ParamList ps;
    self.blocks[b].collect(ps);
    add("sp.enc." + std::to_string(b), ps);
  }
  {
    ParamList ps;
    self.final_norm.collect(ps);
    self.output.collect(ps);
    add("sp.out", ps);
  }
  out.emplace_back("total", total);
  return out;
}

Index SecondPassModel::total_params() const { return count_params().back().second; }

ModelCheckpoint SecondPassModel::to_checkpoint() const {
  ModelCheckpoint ck;
  ck.arch = arch_tag();
  ck.meta["model"] = config_.to_json();
  ck.add(const_cast<SecondPassModel&>(*this).params());
  return ck;
}

SecondPassModel SecondPassModel::from_checkpoint(const ModelCheckpoint& ckpt) {
  const SecondPassConfig cfg = SecondPassConfig::from_json(ckpt.meta.at("model"));
  SecondPassModel m(cfg);
  if (ckpt.arch != m.arch_tag()) {
    throw ConfigError("checkpoint architecture '" + ckpt.arch + "' does not match model '" + m.arch_tag() + "'");
  }
  ckpt.restore(m.params());
  return m;
}

double second_pass_score(const SecondPassModel& model, const MultichannelBatch& input,
                         const std::vector<int>& keyword) {
  return keyword_score(model.encode(input), keyword);
}

}  // namespace vtmc
