// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "vtmc/ndcore/adam.hpp"
#include "vtmc/ndcore/checkpoint.hpp"
#include "vtmc/ndcore/gradcheck.hpp"
#include "vtmc/ndcore/layers.hpp"

using namespace vtmc;

namespace {

Matrix naive_linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y(x.rows(), w.rows());
  for (Index t = 0; t < x.rows(); ++t) {
    for (Index o = 0; o < w.rows(); ++o) {
      double acc = b(0, o);
      for (Index i = 0; i < x.cols(); ++i) acc += x(t, i) * w(o, i);
      y(t, o) = acc;
    }
  }
  return y;
}

LinearLayer random_linear(Index in, Index out, Rng& rng) {
  LinearLayer l("lin", in, out);
  l.weight.value = random_normal(out, in, rng);
  l.bias.value = random_normal(1, out, rng);
  return l;
}

}  // namespace

TEST_CASE("linear_forward identity and constant cases") {
  LinearLayer l("lin", 4, 4);
  l.weight.value = Matrix::Identity(4, 4);
  Rng rng(1);
  const Matrix x = random_normal(3, 4, rng);
  CHECK((linear_forward(l, x) - x).cwiseAbs().maxCoeff() == 0.0);

  l.weight.value.setZero();
  l.bias.value << 1, 2, 3, 4;
  const Matrix y = linear_forward(l, x);
  for (Index r = 0; r < y.rows(); ++r) CHECK((y.row(r) - l.bias.value).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear_forward matches a triple loop") {
  Rng rng(2);
  const LinearLayer l = random_linear(4, 3, rng);
  const Matrix x = random_normal(2, 4, rng);
  const Matrix diff = linear_forward(l, x) - naive_linear(x, l.weight.value, l.bias.value);
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear_forward is additive up to the bias") {
  Rng rng(3);
  const LinearLayer l = random_linear(5, 3, rng);
  const Matrix x1 = random_normal(4, 5, rng);
  const Matrix x2 = random_normal(4, 5, rng);
  Matrix expect = linear_forward(l, x1) + linear_forward(l, x2);
  expect.rowwise() -= l.bias.value.row(0);
  CHECK((linear_forward(l, x1 + x2) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear_forward rejects a width mismatch") {
  LinearLayer l("lin", 4, 2);
  CHECK_THROWS_AS(linear_forward(l, Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("prelu_forward definition") {
  PReLU act("act", 3, 0.25);
  Matrix x(2, 3);
  x << -2, 0, 3, 1, -4, 0.5;
  const Matrix y = prelu_forward(act, x);
  CHECK(y(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(y(0, 2) == 3.0);
  CHECK(y(1, 1) == -1.0);

  Matrix pos = x.cwiseAbs();
  CHECK((prelu_forward(act, pos) - pos).cwiseAbs().maxCoeff() == 0.0);

  act.slope.value.setOnes();
  CHECK((prelu_forward(act, x) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(prelu_forward(act, Matrix::Zero(1, 4)), DimensionError);
}

TEST_CASE("prelu is positively homogeneous") {
  Rng rng(4);
  PReLU act("act", 6, 0.25);
  act.slope.value = random_normal(1, 6, rng);
  const Matrix x = random_normal(5, 6, rng);
  for (double a : {0.1, 1.0, 3.7}) {
    CHECK((prelu_forward(act, a * x) - a * prelu_forward(act, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("backward of sum through a linear layer") {
  Rng rng(5);
  LinearLayer l = random_linear(3, 2, rng);
  const Matrix x = random_normal(4, 3, rng);
  Tape tape;
  const auto xv = tape.input(x, true);
  const auto y = l.forward(tape, xv);
  tape.backward(tape.sum(y));
  CHECK((tape.param_grad(l.bias) - Matrix::Constant(1, 2, 4.0)).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix dw = tape.param_grad(l.weight);
  for (Index o = 0; o < 2; ++o) {
    for (Index i = 0; i < 3; ++i) CHECK(dw(o, i) == doctest::Approx(x.col(i).sum()).epsilon(1e-12));
  }
  const Matrix dx = tape.grad(xv);
  for (Index t = 0; t < 4; ++t) {
    for (Index i = 0; i < 3; ++i) CHECK(dx(t, i) == doctest::Approx(l.weight.value.col(i).sum()).epsilon(1e-12));
  }
}

TEST_CASE("prelu slope gradient equals the negative input") {
  PReLU act("act", 2, 0.25);
  Matrix x(1, 2);
  x << -1.5, 2.0;
  Tape tape;
  const auto y = act.forward(tape, tape.input(x));
  tape.backward(tape.sum(y));
  const Matrix g = tape.param_grad(act.slope);
  CHECK(g(0, 0) == -1.5);
  CHECK(g(0, 1) == 0.0);
}

TEST_CASE("backward state errors") {
  Tape empty;
  CHECK_THROWS_AS(empty.backward(Tape::Var{0}), StateError);

  Tape tape;
  const auto s = tape.sum(tape.input(Matrix::Ones(2, 2), true));
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), StateError);

  Tape nograd(false);
  const auto s2 = nograd.sum(nograd.input(Matrix::Ones(1, 1)));
  CHECK_THROWS_AS(nograd.backward(s2), StateError);
}

TEST_CASE("gradcheck on a linear layer at 1e-7") {
  Rng rng(6);
  LinearLayer l = random_linear(4, 3, rng);
  const Matrix x = random_normal(5, 4, rng);
  const Matrix w = random_normal(5, 3, rng);
  ParamList ps;
  l.collect(ps);
  GradcheckOptions o;
  o.tolerance = 1e-7;
  const auto rep = gradcheck([&](Tape& t) { return t.dot_const(l.forward(t, t.input(x)), w); }, ps, o);
  CHECK(rep.pass());
  CHECK(rep.entries.size() == 2);
}

TEST_CASE("gradcheck flags a corrupted gradient") {
  Rng rng(7);
  LinearLayer l = random_linear(4, 3, rng);
  const Matrix x = random_normal(5, 4, rng);
  const Matrix w = random_normal(5, 3, rng);
  ParamList ps;
  l.collect(ps);
  GradcheckOptions o;
  o.corrupt_scale = 1.01;
  const auto rep = gradcheck([&](Tape& t) { return t.dot_const(l.forward(t, t.input(x)), w); }, ps, o);
  CHECK_FALSE(rep.pass());
  CHECK(rep.worst() > 1e-3);
}

TEST_CASE("every tape op passes gradcheck") {
  Rng rng(8);
  Parameter a("a", 6, 4), b("b", 6, 4), c("c", 3, 4), g("g", 1, 4), beta("beta", 1, 4), s("s", 1, 4);
  for (Parameter* p : {&a, &b, &c, &g, &beta, &s}) p->value = random_normal(p->value.rows(), p->value.cols(), rng);
  // keep PReLU inputs away from the kink
  for (Index i = 0; i < a.value.size(); ++i) {
    if (std::abs(a.value.data()[i]) < 0.05) a.value.data()[i] = 0.3;
  }
  const ParamList ps{&a, &b, &c, &g, &beta, &s};
  const Matrix mask = random_normal(6, 4, rng);
  const Matrix wsq = random_normal(6, 6, rng);
  const std::vector<int> labels{0, 3, 1, 2, 2, 0};

  std::vector<std::pair<std::string, LossBuilder>> cases = {
      {"matmul_nt+softmax",
       [&](Tape& t) {
         const auto m = t.softmax_rows(t.matmul_nt(t.param(a), t.param(b)));
         return t.dot_const(m, wsq);
       }},
      {"matmul", [&](Tape& t) { return t.dot_const(t.matmul(t.matmul_nt(t.param(a), t.param(c)), t.param(c)), mask); }},
      {"layer_norm",
       [&](Tape& t) { return t.dot_const(t.layer_norm(t.param(a), t.param(g), t.param(beta)), mask); }},
      {"prelu+mask", [&](Tape& t) { return t.sum(t.mask(t.prelu(t.param(a), t.param(s)), mask)); }},
      {"mean_blocks+add_tiled",
       [&](Tape& t) {
         const auto m = t.mean_blocks(t.param(a), 2);
         return t.dot_const(t.add_tiled(t.param(b), m), mask);
       }},
      {"stack+slice",
       [&](Tape& t) {
         const auto v = t.vstack({t.param(a), t.param(c)});
         const auto h = t.hstack({t.slice_rows(v, 2, 6), t.param(b)});
         return t.dot_const(t.slice_cols(h, 1, 4), mask);
       }},
      {"linear_cols+bias",
       [&](Tape& t) {
         const auto y = t.linear_cols(t.slice_cols(t.param(a), 0, 2), t.param(c), 1, 2);
         return t.sum(t.scale(t.relu(t.add(y, t.slice_cols(t.param(b), 0, 3))), 0.5));
       }},
      {"cross_entropy", [&](Tape& t) { return t.softmax_cross_entropy(t.param(a), labels); }},
  };
  for (auto& [name, fn] : cases) {
    CAPTURE(name);
    const auto rep = gradcheck(fn, ps);
    CHECK(rep.pass());
  }
}

TEST_CASE("adam basics") {
  Parameter w("w", 1, 3);
  w.value << 1, -2, 3;
  const Matrix orig = w.value;
  AdamState st({&w}, AdamConfig{});
  st.step({&w}, {Matrix::Zero(1, 3)});
  CHECK((w.value - orig).cwiseAbs().maxCoeff() == 0.0);

  Parameter u("u", 1, 2);
  u.value << 0, 0;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  AdamState su({&u}, cfg);
  Matrix gu(1, 2);
  gu << 0.7, -3.0;
  su.step({&u}, {gu});
  CHECK(u.value(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(u.value(0, 1) == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("adam converges on w squared") {
  Parameter w("w", 1, 1);
  w.value(0, 0) = 1.0;
  AdamConfig cfg;
  cfg.lr = 0.05;
  AdamState st({&w}, cfg);
  for (int i = 0; i < 100; ++i) st.step({&w}, {Matrix::Constant(1, 1, 2 * w.value(0, 0))});
  CHECK(std::abs(w.value(0, 0)) < 0.1);
}

TEST_CASE("adam rejects non-finite gradients before touching parameters") {
  Parameter a("first", 1, 1), b("second.weight", 1, 1);
  a.value(0, 0) = 1;
  b.value(0, 0) = 2;
  AdamState st({&a, &b}, AdamConfig{});
  try {
    st.step({&a, &b}, {Matrix::Ones(1, 1), Matrix::Constant(1, 1, std::nan(""))});
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("second.weight") != std::string::npos);
  }
  CHECK(a.value(0, 0) == 1.0);
  CHECK(st.step_count() == 0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(9);
  Parameter p("layer.weight", 3, 5), q("layer.bias", 1, 5);
  p.value = random_normal(3, 5, rng);
  q.value = random_normal(1, 5, rng);
  ModelCheckpoint ck;
  ck.arch = "test.arch";
  ck.meta["note"] = "x";
  ck.add({&p, &q});
  const auto dir = std::filesystem::temp_directory_path() / "vtmc_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(ck, dir / "a.ckpt");
  const ModelCheckpoint back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.arch == "test.arch");
  CHECK(back.meta["note"] == "x");
  REQUIRE(back.entries.size() == 2);
  CHECK(std::memcmp(back.at("layer.weight").data(), p.value.data(), sizeof(double) * 15) == 0);
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ck));

  Parameter r("layer.weight", 3, 5);
  back.restore({&r});
  CHECK(r.value == p.value);
  Parameter wrong("layer.weight", 2, 5);
  CHECK_THROWS(back.restore({&wrong}));

  std::string bytes = serialize_checkpoint(ck);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bytes), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("gradcheck treats a parameter with no influence as zero on both sides") {
  Rng rng(10);
  Parameter used("used", 2, 3), unused("unused", 1, 1);
  used.value = random_normal(2, 3, rng);
  unused.value(0, 0) = 0.7;
  const auto rep = gradcheck(
      [&](Tape& t) {
        // adding a per-row constant does not change a row softmax
        const auto shift = t.matmul(t.input(Matrix::Ones(2, 1)), t.param(unused));
        const auto z = t.add(t.param(used), t.matmul(shift, t.input(Matrix::Ones(1, 3))));
        return t.dot_const(t.softmax_rows(z), Matrix::Identity(2, 3));
      },
      {&used, &unused});
  CHECK(rep.pass());
  CHECK_FALSE(rep.entries[0].zero);
  CHECK(rep.entries[1].zero);
}
