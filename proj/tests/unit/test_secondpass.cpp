// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>

#include "unit/tac_oracle.hpp"
#include "vtmc/ndcore/gradcheck.hpp"
#include "vtmc/secondpass/model.hpp"

using namespace vtmc;
using namespace vtmc::testing;

namespace {

SecondPassModel make(Variant v, std::uint64_t seed, SecondPassConfig cfg) {
  cfg.variant = v;
  SecondPassModel m(cfg);
  Rng rng(seed);
  m.init(rng);
  // PReLU slopes and norm gains away from their defaults
  for (Parameter* p : m.params()) {
    if (p->name.ends_with(".slope") || p->name.ends_with(".gamma") || p->name.ends_with(".beta")) {
      p->value.array() += random_normal(p->value.rows(), p->value.cols(), rng, 0.1).array();
    }
  }
  return m;
}

MultichannelBatch random_batch(Index n, Index t, Index f, Rng& rng) {
  MultichannelBatch b;
  b.channels = random_channels(n, t, f, rng);
  b.selected = b.channels[0];
  b.selected_index = 0;
  return b;
}

}  // namespace

TEST_CASE("logits shape and determinism") {
  Rng rng(41);
  for (Variant v : {Variant::Baseline, Variant::Tac, Variant::ModTac, Variant::Concat}) {
    const SecondPassModel m = make(v, 1, SecondPassConfig::desk(v));
    const MultichannelBatch b = random_batch(4, 9, 280, rng);
    const Matrix a = m.encode(b);
    CHECK(a.rows() == 9);
    CHECK(a.cols() == 55);
    CHECK(a == m.encode(b));
    const std::vector<int> kw{3, 5, 7};
    CHECK(second_pass_score(m, b, kw) == second_pass_score(m, b, kw));
  }
}

TEST_CASE("variant and input mismatch") {
  Rng rng(42);
  const SecondPassModel base = make(Variant::Baseline, 2, SecondPassConfig::tiny(Variant::Baseline));
  const SecondPassModel tac = make(Variant::Tac, 2, SecondPassConfig::tiny(Variant::Tac));
  const SecondPassModel mod = make(Variant::ModTac, 2, SecondPassConfig::tiny(Variant::ModTac));
  MultichannelBatch only_channels;
  only_channels.channels = random_channels(3, 5, 280, rng);
  MultichannelBatch only_selected;
  only_selected.selected = random_normal(5, 280, rng);
  CHECK_THROWS_AS(base.encode(only_channels), ConfigError);
  CHECK_THROWS_AS(tac.encode(only_selected), ConfigError);
  CHECK_THROWS_AS(mod.encode(only_channels), ConfigError);
  CHECK_THROWS_AS(mod.encode(only_selected), ConfigError);
  FeatureSequence fs;
  fs.frames = only_selected.selected;
  CHECK_THROWS_AS(tac.encode(fs), ConfigError);
  CHECK(base.encode(fs) == base.encode(only_selected));
  CHECK_THROWS_AS(parse_variant("beamformer"), ConfigError);
}

TEST_CASE("baseline with zero attention and feed-forward outputs reduces to the outer layers") {
  Rng rng(43);
  SecondPassModel m = make(Variant::Baseline, 3, SecondPassConfig::desk(Variant::Baseline));
  for (auto& b : m.blocks) {
    for (LinearLayer* l : {&b.wo, &b.ff2}) {
      l->weight.value.setZero();
      l->bias.value.setZero();
    }
  }
  const Matrix x = random_normal(11, 280, rng);
  Matrix h = linear_forward(m.input_proj, x) + sinusoidal_positions(11, 64);
  Matrix n(h.rows(), h.cols());
  for (Index t = 0; t < h.rows(); ++t) {
    const double mu = h.row(t).mean();
    const double var = (h.row(t).array() - mu).square().mean();
    n.row(t) = ((h.row(t).array() - mu) / std::sqrt(var + 1e-5)).matrix().cwiseProduct(m.final_norm.gamma.value) +
               m.final_norm.beta.value;
  }
  const Matrix expect = linear_forward(m.output, n);
  MultichannelBatch b;
  b.selected = x;
  CHECK(max_abs(m.encode(b), expect) < 1e-10);
}

TEST_CASE("attention rows sum to one") {
  Rng rng(44);
  const SecondPassModel m = make(Variant::ModTac, 4, SecondPassConfig::desk(Variant::ModTac));
  std::vector<Matrix> att;
  m.encode(random_batch(3, 13, 280, rng), &att);
  CHECK(att.size() == 2 * 4);
  for (const Matrix& a : att) {
    CHECK(a.rows() == 13);
    CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("multichannel logits are invariant to regular channel order") {
  Rng rng(45);
  for (Variant v : {Variant::Tac, Variant::ModTac}) {
    const SecondPassModel m = make(v, 5, SecondPassConfig::desk(v));
    for (int trial = 0; trial < 5; ++trial) {
      MultichannelBatch b = random_batch(4, 7, 280, rng);
      b.selected = random_normal(7, 280, rng);
      MultichannelBatch p = b;
      std::vector<int> perm{0, 1, 2, 3};
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int i = 0; i < 4; ++i) p.channels[i] = b.channels[perm[i]];
      CHECK(max_abs(m.encode(b), m.encode(p)) < 1e-6);
    }
  }
}

TEST_CASE("identical channels behave as one virtual channel") {
  Rng rng(46);
  const Matrix x = random_normal(6, 280, rng);
  for (Variant v : {Variant::Tac, Variant::ModTac}) {
    SecondPassConfig cfg = SecondPassConfig::desk(v);
    // with the selected output pooled in, the weight of the regular channels depends on N
    cfg.pool_includes_sc = false;
    const SecondPassModel m = make(v, 6, cfg);
    MultichannelBatch many;
    many.channels = {x, x, x, x};
    many.selected = x;
    MultichannelBatch one;
    one.channels = {x};
    one.selected = x;
    CHECK(max_abs(m.encode(many), m.encode(one)) < 1e-9);
  }
}

TEST_CASE("pooling flag changes only the modtac pooling set") {
  Rng rng(47);
  SecondPassConfig cfg = SecondPassConfig::desk(Variant::ModTac);
  const SecondPassModel with_sc = make(Variant::ModTac, 7, cfg);
  cfg.pool_includes_sc = false;
  SecondPassModel without = make(Variant::ModTac, 7, cfg);
  MultichannelBatch b = random_batch(3, 5, 280, rng);
  b.selected = random_normal(5, 280, rng);
  CHECK(max_abs(with_sc.encode(b), without.encode(b)) > 1e-6);
  // Without the selected channel in the pool, its S head has no influence.
  const Matrix before = without.encode(b);
  without.modtac[0].S.linear.bias.value.array() += 1.0;
  CHECK(without.encode(b) == before);
}

TEST_CASE("training dropout is stochastic and inference is not") {
  Rng rng(48);
  const SecondPassModel m = make(Variant::Baseline, 8, SecondPassConfig::desk(Variant::Baseline));
  const MultichannelBatch b = random_batch(1, 6, 280, rng);
  Rng drng(1);
  ForwardContext ctx;
  ctx.rng = &drng;
  ctx.dropout = 0.1;
  Tape t1(false), t2(false);
  const Matrix a = t1.value(m.encode(t1, b, ctx));
  const Matrix c = t2.value(m.encode(t2, b, ctx));
  CHECK(max_abs(a, c) > 1e-6);
  CHECK(m.encode(b) == m.encode(b));
}

TEST_CASE("tiny full model gradcheck") {
  Rng rng(49);
  const std::vector<int> labels{4, 9};
  for (Variant v : {Variant::Baseline, Variant::Tac, Variant::ModTac}) {
    CAPTURE(variant_name(v));
    SecondPassConfig cfg = SecondPassConfig::tiny(v);
    cfg.input_dim = 12;
    SecondPassModel m = make(v, 9, cfg);
    MultichannelBatch b = random_batch(3, 5, 12, rng);
    b.selected = random_normal(5, 12, rng);
    const auto rep = gradcheck([&](Tape& t) { return ctc_loss(t, m.encode(t, b), labels); }, m.params());
    CHECK(rep.worst() < 1e-5);
  }
}

TEST_CASE("encoder block gradcheck at 1e-6") {
  Rng rng(50);
  EncoderBlock blk("sp.enc.0", 8, 2, 16);
  blk.init(rng);
  ParamList ps;
  blk.collect(ps);
  randomize({ps[0], ps[1], ps[10], ps[11]}, rng, 0.3);
  Parameter x("x", 5, 8);
  x.value = random_normal(5, 8, rng);
  ps.push_back(&x);
  const Matrix w = random_normal(5, 8, rng);
  const auto rep = gradcheck([&](Tape& t) { return t.dot_const(blk.forward(t, t.param(x), {}), w); }, ps);
  CHECK(rep.pass());
}

TEST_CASE("parameter counts") {
  const SecondPassModel base(SecondPassConfig::paper(Variant::Baseline));
  const SecondPassModel tac(SecondPassConfig::paper(Variant::Tac));
  const SecondPassModel mod(SecondPassConfig::paper(Variant::ModTac));
  CHECK(base.total_params() < tac.total_params());
  CHECK(tac.total_params() < mod.total_params());

  const auto counts = tac.count_params();
  CHECK(counts.front().first == "sp.tac");
  const Index closed = (280 * 768 + 2 * 768) + (768 * 768 + 2 * 768) + (1536 * 280 + 2 * 280);
  CHECK(counts.front().second == closed);
  CHECK(tac.total_params() - closed == base.total_params());

  const Index d = 256, ff = 1024;
  const Index block = 4 * (d * d + d) + 4 * d + (d * ff + ff) + (ff * d + d);
  CHECK(base.total_params() == (280 * d + d) + 6 * block + 2 * d + (d * 55 + 55));
}

TEST_CASE("checkpoint round trip") {
  Rng rng(51);
  const SecondPassModel m = make(Variant::ModTac, 10, SecondPassConfig::desk(Variant::ModTac));
  const ModelCheckpoint ck = parse_checkpoint(serialize_checkpoint(m.to_checkpoint()));
  CHECK(ck.arch == "sp.modtac");
  CHECK(ck.contains("sp.tac.P.weight"));
  CHECK(ck.contains("sp.enc.1.attn.q.weight"));
  CHECK(ck.contains("sp.out.weight"));
  const SecondPassModel back = SecondPassModel::from_checkpoint(ck);
  const MultichannelBatch b = random_batch(4, 6, 280, rng);
  CHECK(back.encode(b) == m.encode(b));
  ModelCheckpoint wrong = ck;
  wrong.arch = "sp.tac";
  CHECK_THROWS_AS(SecondPassModel::from_checkpoint(wrong), ConfigError);
}
