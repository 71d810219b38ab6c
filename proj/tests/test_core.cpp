#include <cmath>
#include <cstdlib>
#include <numeric>

#include "doctest.h"
#include "lamward/autodiff.hpp"
#include "lamward/binio.hpp"
#include "lamward/error.hpp"
#include "lamward/kernels.hpp"
#include "lamward/optim.hpp"
#include "lamward/rng.hpp"
#include "lamward/tensor.hpp"
#include "support/op_cases.hpp"

using namespace lamward;

TEST_CASE("rng streams are pure functions of seed, label and position") {
  Rng a(42, "x"), b(42, "x"), c(42, "y"), d(43, "x");
  const auto a0 = a.next_u64();
  CHECK(a0 == b.next_u64());
  CHECK(a0 != c.next_u64());
  CHECK(a0 != d.next_u64());
  CHECK(a.at(0) == a0);
  a.seek(0);
  CHECK(a.next_u64() == a0);
  CHECK(a.child("k").next_u64() == b.child("k").next_u64());
  CHECK(a.child(std::uint64_t{1}).next_u64() != a.child(std::uint64_t{2}).next_u64());
}

TEST_CASE("rng uniform and normal moments") {
  Rng r(7, "moments");
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u > 0.0);
    CHECK_UNARY(u < 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng below is uniform over small ranges") {
  Rng r(3, "below");
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[r.below(7)];
  for (int c : counts) CHECK(std::abs(c - n / 7) < 5 * std::sqrt(n / 7.0));
  CHECK_THROWS(r.below(0));
}

TEST_CASE("tensor basics") {
  Tensor t(2, 3, 1.5);
  CHECK(t.shape() == std::vector<std::size_t>{2, 3});
  t(1, 2) = 4.0;
  CHECK(t[5] == 4.0);
  CHECK(t.row_copy(1) == Tensor(1, 3, std::vector<double>{1.5, 1.5, 4.0}));
  CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::scalar(1).item() + t.item(), ShapeError);
  Tensor bad(1, 2);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(require_finite(bad, "bad"), NumericError);
  std::vector<Tensor> parts{Tensor(1, 2, 1.0), Tensor(2, 2, 2.0)};
  CHECK(vstack(parts).rows() == 3);
  CHECK(l1_mean_distance(std::vector<double>{0, 2}, std::vector<double>{1, 0}) == 1.5);
}

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  Rng r(5, "kernels");
  for (std::size_t n : {3u, 17u, 64u, 130u}) {
    const Tensor a = rng_draw(r, Dist::normal, n, n + 3), b = rng_draw(r, Dist::normal, n + 3, n + 1);
    const Tensor bt = rng_draw(r, Dist::normal, n + 1, n + 3), at = rng_draw(r, Dist::normal, n, n + 1);
    Tensor p(n, n + 1), s(n, n + 1);
    kernels::matmul(a, b, p);
    kernels::serial::matmul(a, b, s);
    CHECK(p == s);
    kernels::matmul_nt(a, bt, p);
    kernels::serial::matmul_nt(a, bt, s);
    CHECK(p == s);
    Tensor p2(n + 3, n + 1), s2(n + 3, n + 1);
    kernels::matmul_tn(a, at, p2);
    kernels::serial::matmul_tn(a, at, s2);
    CHECK(p2 == s2);
  }
  Tensor out(2, 2);
  CHECK_THROWS_AS(kernels::matmul(Tensor(2, 3), Tensor(2, 2), out), ShapeError);
}

TEST_CASE("thread cap does not change results") {
  Rng r(6, "threads");
  const Tensor a = rng_draw(r, Dist::normal, 200, 150), b = rng_draw(r, Dist::normal, 150, 120);
  const int before = kernels::max_threads();
  kernels::set_max_threads(1);
  const Tensor one = kernels::matmul(a, b);
  kernels::set_max_threads(4);
  const Tensor four = kernels::matmul(a, b);
  kernels::set_max_threads(before);
  CHECK(one == four);
}

TEST_CASE("parallel_for propagates exceptions") {
  CHECK_THROWS_AS(kernels::parallel_for(10,
                                        [](std::size_t i) {
                                          if (i == 3) throw std::runtime_error("boom");
                                        }),
                  std::runtime_error);
}

TEST_CASE("every differentiable op passes a central-difference check") {
  Rng rng(2024, "gradcheck");
  for (const auto& c : oracle::op_cases()) {
    for (int point = 0; point < 10; ++point) {
      const auto res = oracle::gradcheck(c.build, c.inputs(rng), rng);
      INFO(c.name << " point " << point << " " << res.worst);
      CHECK(res.max_rel < 1e-4);
    }
  }
}

TEST_CASE("kink conventions") {
  ParamSet p;
  p.add("x", Tensor(1, 3, std::vector<double>{0.0, -1.0, 2.0}));
  Tape t;
  Var x = t.param(p, 0);
  auto g = grad(ad::sum(ad::abs(x)), p);
  CHECK(g[0] == Tensor(1, 3, std::vector<double>{0.0, -1.0, 1.0}));
  Tape t2;
  g = grad(ad::sum(ad::relu(t2.param(p, 0))), p);
  CHECK(g[0] == Tensor(1, 3, std::vector<double>{0.0, 0.0, 1.0}));
  // sqrt at zero: exact value, floored derivative.
  ParamSet q;
  q.add("v", Tensor(1, 1, 0.0));
  Tape t3;
  Var s = ad::sqrt_floor(t3.param(q, 0), 1e-4);
  CHECK(s.value().item() == 0.0);
  g = grad(ad::sum(s), q);
  CHECK(g[0].item() == doctest::Approx(0.5 / std::sqrt(1e-4)));
}

TEST_CASE("stop_gradient blocks and straight_through routes") {
  ParamSet p;
  p.add("a", Tensor(1, 2, std::vector<double>{1.0, 2.0}));
  p.add("b", Tensor(1, 2, std::vector<double>{5.0, -3.0}));
  Tape t;
  Var a = t.param(p, 0), b = t.param(p, 1);
  Var st = ad::straight_through(a, ad::stop_gradient(b));
  CHECK(st.value() == p.at(1).value);
  auto g = grad(ad::sum(ad::square(st)), p);
  CHECK(g[0] == Tensor(1, 2, std::vector<double>{10.0, -6.0}));
  CHECK(g[1] == Tensor(1, 2));
}

TEST_CASE("backward requires a finite scalar") {
  ParamSet p;
  p.add("x", Tensor(2, 2, 1.0));
  Tape t;
  Var x = t.param(p, 0);
  CHECK_THROWS_AS(t.backward(x), ShapeError);
  CHECK_THROWS_AS(ad::matmul(x, t.constant(Tensor(3, 1))), ShapeError);
  CHECK_THROWS_AS(ad::exp(ad::scale(x, 1e4)), NumericError);
}

TEST_CASE("unreached parameters get zero gradients") {
  ParamSet p;
  p.add("used", Tensor(1, 2, 1.0));
  p.add("unused", Tensor(2, 2, 1.0));
  Tape t;
  auto g = grad(ad::sum(t.param(p, "used")), p);
  CHECK(g[1] == Tensor(2, 2));
}

TEST_CASE("adamw first step closed form") {
  ParamSet p;
  p.add("w", Tensor(1, 2, std::vector<double>{1.0, -2.0}));
  p.add("b", Tensor(1, 1, 0.5), false);
  AdamWHyper h;
  h.lr = 0.1;
  h.weight_decay = 0.5;
  auto st = AdamWState::init(p, h);
  std::vector<Tensor> g{Tensor(1, 2, std::vector<double>{0.3, -4.0}), Tensor(1, 1, 2.0)};
  adamw_step(p, g, st);
  // Bias-corrected first step moves each entry by lr * sign(g) (up to eps).
  const double decayed0 = 1.0 - 0.1 * 0.5 * 1.0, decayed1 = -2.0 - 0.1 * 0.5 * -2.0;
  CHECK(p.at(0).value[0] == doctest::Approx(decayed0 - 0.1 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
  CHECK(p.at(0).value[1] == doctest::Approx(decayed1 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
  CHECK(p.at(1).value[0] == doctest::Approx(0.5 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
  CHECK(st.step == 1);
}

TEST_CASE("adamw second step closed form") {
  ParamSet p;
  p.add("w", Tensor(1, 1, 0.0), false);
  AdamWHyper h;
  h.lr = 0.01;
  auto st = AdamWState::init(p, h);
  const double g1 = 1.0, g2 = -3.0;
  adamw_step(p, std::vector<Tensor>{Tensor(1, 1, g1)}, st);
  const double after1 = p.at(0).value[0];
  adamw_step(p, std::vector<Tensor>{Tensor(1, 1, g2)}, st);
  const double m = 0.9 * (0.1 * g1) + 0.1 * g2, v = 0.999 * (0.001 * g1 * g1) + 0.001 * g2 * g2;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  CHECK(p.at(0).value[0] == doctest::Approx(after1 - 0.01 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adamw rejects mismatched gradients") {
  ParamSet p;
  p.add("w", Tensor(1, 2));
  auto st = AdamWState::init(p, {});
  CHECK_THROWS_AS(adamw_step(p, std::vector<Tensor>{Tensor(2, 1)}, st), ShapeError);
}

TEST_CASE("warmup then cosine schedule") {
  CHECK(warmup_cosine_lr(1.0, 0, 100, 0.1) == doctest::Approx(0.1));
  CHECK(warmup_cosine_lr(1.0, 9, 100, 0.1) == doctest::Approx(1.0));
  CHECK(warmup_cosine_lr(1.0, 10, 100, 0.1) == doctest::Approx(1.0));
  CHECK(warmup_cosine_lr(1.0, 55, 100, 0.1) == doctest::Approx(0.5));
  CHECK(warmup_cosine_lr(1.0, 100, 100, 0.1) == doctest::Approx(0.0));
}

TEST_CASE("binary reader and writer round trip") {
  BinaryWriter w;
  w.u8(7);
  w.u32(123456);
  w.u64(1ULL << 60);
  w.f64(-0.1);
  w.str("hello");
  w.tensor(Tensor(2, 2, std::vector<double>{1, 2, 3, std::nextafter(1.0, 2.0)}));
  BinaryReader r(w.buffer());
  CHECK(r.u8() == 7);
  CHECK(r.u32() == 123456);
  CHECK(r.u64() == (1ULL << 60));
  CHECK(r.f64() == -0.1);
  CHECK(r.str() == "hello");
  CHECK(r.tensor()[3] == std::nextafter(1.0, 2.0));
  CHECK(r.at_end());
  CHECK_THROWS_AS(r.u8(), FormatError);
  CHECK(std::stod(format_double(0.1)) == 0.1);
}
