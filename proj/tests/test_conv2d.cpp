#include "pyra/conv2d.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracle/oracle.hpp"
#include "pyra/parallel.hpp"
#include "pyra/rng.hpp"

using namespace pyra;

namespace {

PlaneBuf<double> random_plane(std::size_t A, std::size_t B, std::size_t C,
                              Rng& rng) {
  PlaneBuf<double> p(A, B, C);
  for (auto& v : p.v) v = rng.uniform(-1.0, 1.0);
  return p;
}

Kernel random_kernel(std::size_t kh, std::size_t kw, std::size_t cin,
                     std::size_t cout, Rng& rng) {
  Kernel k(kh, kw, cin, cout);
  for (auto& v : k.w) v = rng.uniform(-1.0, 1.0);
  return k;
}

}  // namespace

TEST_CASE("kernel shape validation") {
  CHECK_THROWS_AS(Kernel(2, 3, 1, 1), ShapeError);
  CHECK_THROWS_AS(Kernel(3, 0, 1, 1), ShapeError);
  CHECK_THROWS_AS(Kernel(3, 3, 0, 1), ShapeError);
  CHECK_NOTHROW(Kernel(1, 1, 1, 1));
}

TEST_CASE("identity kernel reproduces the input") {
  Rng rng(7);
  auto in = random_plane(5, 4, 2, rng);
  Kernel k(3, 3, 2, 2);
  k.at(1, 1, 0, 0) = 1.0;
  k.at(1, 1, 1, 1) = 1.0;
  PlaneBuf<double> out(5, 4, 2);
  conv_forward<double>(in.cview(), k, nullptr, out.view());
  for (std::size_t i = 0; i < in.v.size(); ++i) CHECK(out.v[i] == in.v[i]);
}

TEST_CASE("all-ones 3x3 kernel counts covered pixels") {
  PlaneBuf<double> in(4, 3, 1);
  std::fill(in.v.begin(), in.v.end(), 1.0);
  Kernel k(3, 3, 1, 1);
  std::fill(k.w.begin(), k.w.end(), 1.0);
  PlaneBuf<double> out(4, 3, 1);
  conv_forward<double>(in.cview(), k, nullptr, out.view());
  auto o = out.view();
  CHECK(o.at(1, 1, 0) == 9.0);  // interior
  CHECK(o.at(0, 1, 0) == 6.0);  // edge
  CHECK(o.at(0, 0, 0) == 4.0);  // corner
  CHECK(o.at(3, 2, 0) == 4.0);
}

TEST_CASE("bias only") {
  PlaneBuf<double> in(3, 3, 1);
  Kernel k(3, 3, 1, 2);
  const double bias[2] = {0.5, -1.25};
  PlaneBuf<double> out(3, 3, 2);
  conv_forward<double>(in.cview(), k, bias, out.view());
  auto o = out.view();
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t a = 0; a < 3; ++a) {
      CHECK(o.at(a, b, 0) == 0.5);
      CHECK(o.at(a, b, 1) == -1.25);
    }
}

TEST_CASE("accumulate adds onto existing output") {
  Rng rng(3);
  auto in = random_plane(4, 4, 1, rng);
  auto k = random_kernel(3, 3, 1, 1, rng);
  PlaneBuf<double> once(4, 4, 1), twice(4, 4, 1);
  conv_forward<double>(in.cview(), k, nullptr, once.view());
  conv_forward<double>(in.cview(), k, nullptr, twice.view(), false);
  conv_forward<double>(in.cview(), k, nullptr, twice.view(), true);
  for (std::size_t i = 0; i < once.v.size(); ++i)
    CHECK(twice.v[i] == doctest::Approx(2.0 * once.v[i]).epsilon(1e-15));
}

TEST_CASE("convolution is linear in the input") {
  Rng rng(11);
  auto a = random_plane(5, 6, 2, rng);
  auto b = random_plane(5, 6, 2, rng);
  auto k = random_kernel(5, 3, 2, 3, rng);

  PlaneBuf<double> sum(5, 6, 2);
  for (std::size_t i = 0; i < sum.v.size(); ++i)
    sum.v[i] = 2.0 * a.v[i] + b.v[i];

  PlaneBuf<double> oa(5, 6, 3), ob(5, 6, 3), osum(5, 6, 3);
  conv_forward<double>(a.cview(), k, nullptr, oa.view());
  conv_forward<double>(b.cview(), k, nullptr, ob.view());
  conv_forward<double>(sum.cview(), k, nullptr, osum.view());
  for (std::size_t i = 0; i < osum.v.size(); ++i)
    CHECK(osum.v[i] ==
          doctest::Approx(2.0 * oa.v[i] + ob.v[i]).epsilon(1e-12));
}

TEST_CASE("translation equivariance away from the borders") {
  Rng rng(5);
  PlaneBuf<double> in(9, 9, 1);
  in.view().at(4, 4, 0) = 1.0;
  PlaneBuf<double> shifted(9, 9, 1);
  shifted.view().at(5, 4, 0) = 1.0;
  auto k = random_kernel(3, 3, 1, 1, rng);
  PlaneBuf<double> o1(9, 9, 1), o2(9, 9, 1);
  conv_forward<double>(in.cview(), k, nullptr, o1.view());
  conv_forward<double>(shifted.cview(), k, nullptr, o2.view());
  for (std::size_t b = 1; b < 8; ++b)
    for (std::size_t a = 1; a < 7; ++a)
      CHECK(o1.view().at(a, b, 0) == o2.view().at(a + 1, b, 0));
}

TEST_CASE("backward_input is the adjoint of forward") {
  // <conv(x), y> == <x, conv_backward_input(y)> for bias-free convolution.
  Rng rng(23);
  const std::size_t A = 5, B = 4, CI = 2, CO = 3;
  auto x = random_plane(A, B, CI, rng);
  auto y = random_plane(A, B, CO, rng);
  auto k = random_kernel(3, 5, CI, CO, rng);

  PlaneBuf<double> fx(A, B, CO);
  conv_forward<double>(x.cview(), k, nullptr, fx.view());
  PlaneBuf<double> bty(A, B, CI);
  conv_backward_input(y.cview(), k, bty.view());

  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < fx.v.size(); ++i) lhs += fx.v[i] * y.v[i];
  for (std::size_t i = 0; i < x.v.size(); ++i) rhs += x.v[i] * bty.v[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("kernel and bias gradients match finite differences") {
  Rng rng(41);
  const std::size_t A = 5, B = 4, CI = 2, CO = 3;
  auto x = random_plane(A, B, CI, rng);
  auto k = random_kernel(3, 3, CI, CO, rng);
  std::vector<double> bias(CO);
  for (auto& v : bias) v = rng.uniform(-0.5, 0.5);
  auto dout = random_plane(A, B, CO, rng);

  Kernel dk(3, 3, CI, CO);
  std::vector<double> dbias(CO, 0.0);
  conv_backward_kernel(x.cview(), dout.cview(), dk, dbias.data());

  // Loss = <conv(x), dout>, so dLoss/dw should equal dk.
  auto loss = [&]() {
    PlaneBuf<double> out(A, B, CO);
    conv_forward<double>(x.cview(), k, bias.data(), out.view());
    double s = 0;
    for (std::size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * dout.v[i];
    return s;
  };
  std::vector<double*> params;
  for (auto& w : k.w) params.push_back(&w);
  for (auto& b : bias) params.push_back(&b);
  const auto fd = oracle::finite_diff(loss, params, 1e-6);
  for (std::size_t i = 0; i < dk.w.size(); ++i)
    CHECK(dk.w[i] == doctest::Approx(fd[i]).epsilon(1e-6));
  for (std::size_t i = 0; i < CO; ++i)
    CHECK(dbias[i] == doctest::Approx(fd[dk.w.size() + i]).epsilon(1e-6));
}

TEST_CASE("input gradient matches finite differences") {
  Rng rng(43);
  const std::size_t A = 4, B = 5, CI = 3, CO = 2;
  auto x = random_plane(A, B, CI, rng);
  auto k = random_kernel(5, 3, CI, CO, rng);
  auto dout = random_plane(A, B, CO, rng);

  PlaneBuf<double> dx(A, B, CI);
  conv_backward_input(dout.cview(), k, dx.view());

  auto loss = [&]() {
    PlaneBuf<double> out(A, B, CO);
    conv_forward<double>(x.cview(), k, nullptr, out.view());
    double s = 0;
    for (std::size_t i = 0; i < out.v.size(); ++i) s += out.v[i] * dout.v[i];
    return s;
  };
  std::vector<double*> params;
  for (auto& v : x.v) params.push_back(&v);
  const auto fd = oracle::finite_diff(loss, params, 1e-6);
  for (std::size_t i = 0; i < dx.v.size(); ++i)
    CHECK(dx.v[i] == doctest::Approx(fd[i]).epsilon(1e-6));
}

TEST_CASE("zero upstream gradient yields zero gradients") {
  Rng rng(2);
  auto x = random_plane(3, 3, 1, rng);
  auto k = random_kernel(3, 3, 1, 1, rng);
  PlaneBuf<double> dout(3, 3, 1);
  Kernel dk(3, 3, 1, 1);
  double dbias = 0.0;
  conv_backward_kernel(x.cview(), dout.cview(), dk, &dbias);
  for (double v : dk.w) CHECK(v == 0.0);
  CHECK(dbias == 0.0);
  PlaneBuf<double> dx(3, 3, 1);
  conv_backward_input(dout.cview(), k, dx.view());
  for (double v : dx.v) CHECK(v == 0.0);
}

TEST_CASE("results do not depend on the thread count") {
  Rng rng(99);
  auto x = random_plane(17, 13, 3, rng);
  auto k = random_kernel(5, 5, 3, 4, rng);
  std::vector<double> bias(4);
  for (auto& v : bias) v = rng.uniform(-1.0, 1.0);

  set_threads(1);
  PlaneBuf<double> o1(17, 13, 4);
  conv_forward<double>(x.cview(), k, bias.data(), o1.view());
  Kernel dk1(5, 5, 3, 4);
  std::vector<double> db1(4, 0.0);
  conv_backward_kernel(x.cview(), o1.cview(), dk1, db1.data());

  set_threads(5);
  PlaneBuf<double> o5(17, 13, 4);
  conv_forward<double>(x.cview(), k, bias.data(), o5.view());
  Kernel dk5(5, 5, 3, 4);
  std::vector<double> db5(4, 0.0);
  conv_backward_kernel(x.cview(), o5.cview(), dk5, db5.data());
  set_threads(1);

  CHECK(o1.v == o5.v);
  CHECK(dk1.w == dk5.w);
  CHECK(db1 == db5);
}
