// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "unit/tac_oracle.hpp"
#include "vtmc/ndcore/gradcheck.hpp"

using namespace vtmc;
using namespace vtmc::testing;

TEST_CASE("tac matches the loop oracle") {
  Rng rng(11);
  TacBlock b("tac", 7, 5);
  ParamList ps;
  b.collect(ps);
  randomize(ps, rng);
  for (Index n : {1, 2, 3, 4}) {
    const auto z = random_channels(n, 6, 7, rng);
    const auto got = b.forward(z);
    const auto ref = tac_oracle(b, z);
    for (Index i = 0; i < n; ++i) CHECK(max_abs(got[i], ref[i]) < 1e-12);
  }
}

TEST_CASE("modtac matches the loop oracle") {
  Rng rng(12);
  ModTacBlock b("tac", 7, 5);
  ParamList ps;
  b.collect(ps);
  randomize(ps, rng);
  for (Index n : {1, 2, 4}) {
    const auto z = random_channels(n, 6, 7, rng);
    const Matrix sc = random_normal(6, 7, rng);
    const auto [got, gsc] = b.forward(z, sc);
    const auto [ref, rsc] = modtac_oracle(b, z, sc);
    for (Index i = 0; i < n; ++i) CHECK(max_abs(got[i], ref[i]) < 1e-12);
    CHECK(max_abs(gsc, rsc) < 1e-12);
  }
}

TEST_CASE("zero weights make both blocks exact identities") {
  Rng rng(13);
  TacBlock t("tac", 9, 4);
  ModTacBlock m("tac", 9, 4);
  for (LinearPrelu* l : {&t.P, &t.Q, &t.R, &m.P, &m.Q, &m.R, &m.S}) {
    l->act.slope.value = random_normal(1, l->act.slope.value.cols(), rng);
  }
  const auto z = random_channels(3, 5, 9, rng);
  const Matrix sc = random_normal(5, 9, rng);
  const auto a = t.forward(z);
  const auto [b, bsc] = m.forward(z, sc);
  for (int i = 0; i < 3; ++i) {
    CHECK(a[i] == z[i]);
    CHECK(b[i] == z[i]);
  }
  CHECK(bsc == sc);
}

TEST_CASE("single channel tac equals the single channel pipeline") {
  Rng rng(14);
  TacBlock b("tac", 6, 4);
  ParamList ps;
  b.collect(ps);
  randomize(ps, rng);
  const Matrix z = random_normal(5, 6, rng);
  const Matrix h = lp(b.P, z);
  const Matrix expect = z + lp(b.R, concat({h, lp(b.Q, h)}));
  CHECK(max_abs(b.forward(std::vector<Matrix>{z})[0], expect) < 1e-12);
}

TEST_CASE("modtac selected and regular paths are distinct") {
  Rng rng(15);
  ModTacBlock b("tac", 6, 4);
  ParamList ps;
  b.collect(ps);
  randomize(ps, rng);
  const Matrix z = random_normal(5, 6, rng);
  const auto [out, sc] = b.forward({z}, z);
  CHECK(max_abs(out[0], sc) > 1e-3);
  // Changing S only moves the selected output.
  b.S.linear.bias.value.array() += 1.0;
  const auto [out2, sc2] = b.forward({z}, z);
  CHECK(out2[0] == out[0]);
  CHECK(max_abs(sc2, sc) > 0.1);
}

TEST_CASE("permutation equivariance and selected channel invariance") {
  Rng rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 3;
    TacBlock t("tac", 8, 6);
    ModTacBlock m("tac", 8, 6);
    ParamList ps;
    t.collect(ps);
    m.collect(ps);
    randomize(ps, rng);
    const auto z = random_channels(n, 4, 8, rng);
    const Matrix sc = random_normal(4, 8, rng);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Matrix> zp;
    for (int p : perm) zp.push_back(z[p]);

    const auto a = t.forward(z);
    const auto ap = t.forward(zp);
    const auto [b, bsc] = m.forward(z, sc);
    const auto [bp, bpsc] = m.forward(zp, sc);
    for (Index i = 0; i < n; ++i) {
      CHECK(max_abs(ap[i], a[perm[i]]) < 1e-6);
      CHECK(max_abs(bp[i], b[perm[i]]) < 1e-6);
    }
    CHECK(max_abs(bpsc, bsc) < 1e-6);
  }
}

TEST_CASE("channel_average_pool") {
  Rng rng(17);
  const auto x = random_channels(4, 2, 3, rng);
  CHECK(max_abs(channel_average_pool(x), loop_mean(x)) < 1e-12);
  const Matrix a = random_normal(3, 3, rng);
  CHECK(max_abs(channel_average_pool({a, a, a}), a) < 1e-15);
  CHECK(channel_average_pool({a, Matrix(-a)}).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(channel_average_pool({}), EmptyInputError);
}

TEST_CASE("shape errors") {
  Rng rng(18);
  TacBlock t("tac", 4, 3);
  ModTacBlock m("tac", 4, 3);
  CHECK_THROWS_AS(t.forward({Matrix::Zero(3, 4), Matrix::Zero(2, 4)}), DimensionError);
  CHECK_THROWS_AS(t.forward({Matrix::Zero(3, 5)}), DimensionError);
  CHECK_THROWS_AS(m.forward({Matrix::Zero(3, 4)}, Matrix::Zero(2, 4)), DimensionError);
  MultichannelBatch b;
  CHECK_THROWS_AS(b.validate(false), EmptyInputError);
  b.channels = {Matrix::Zero(3, 4)};
  b.selected = Matrix::Zero(3, 5);
  CHECK_NOTHROW(b.validate(false));
  CHECK_THROWS_AS(b.validate(true), DimensionError);
}

TEST_CASE("gradients pass gradcheck") {
  Rng rng(19);
  const auto z = random_channels(3, 4, 6, rng);
  const Matrix sc = random_normal(4, 6, rng);
  const Matrix w = random_normal(12, 6, rng);
  const Matrix wsc = random_normal(4, 6, rng);
  Parameter zin("input", 12, 6);
  for (int i = 0; i < 3; ++i) zin.value.middleRows(4 * i, 4) = z[static_cast<std::size_t>(i)];
  {
    TacBlock b("tac", 6, 5);
    ParamList ps;
    b.collect(ps);
    randomize(ps, rng);
    ps.push_back(&zin);
    const auto rep = gradcheck([&](Tape& t) { return t.dot_const(b.forward(t, t.param(zin), 3), w); }, ps);
    CHECK(rep.pass());
    CHECK(rep.worst() < 1e-6);
  }
  {
    ModTacBlock b("tac", 6, 5);
    Parameter scp("sc", 4, 6);
    scp.value = sc;
    ParamList ps;
    b.collect(ps);
    randomize(ps, rng);
    ps.push_back(&zin);
    ps.push_back(&scp);
    const auto rep = gradcheck(
        [&](Tape& t) {
          const auto o = b.forward(t, t.param(zin), 3, t.param(scp));
          return t.add(t.dot_const(o.channels, w), t.dot_const(o.selected, wsc));
        },
        ps);
    CHECK(rep.pass());
  }
}

TEST_CASE("parameter counts follow the layer dimensions") {
  TacBlock t("tac", 280, 768);
  ModTacBlock m("tac", 280, 768);
  ParamList pt, pm;
  t.collect(pt);
  m.collect(pm);
  const Index lp_count = [](Index in, Index out) { return in * out + 2 * out; }(280, 768);
  const Index tac = lp_count + (768 * 768 + 2 * 768) + (1536 * 280 + 2 * 280);
  CHECK(count_scalars(pt) == tac);
  CHECK(count_scalars(pm) == 280 * 768 + 2 * 768 + 768 * 768 + 2 * 768 + 2304 * 280 + 2 * 280 + 768 * 280 + 2 * 280);
}
