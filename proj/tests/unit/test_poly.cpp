#include <cmath>
#include <random>

#include "doctest.h"
#include "relunet/poly.hpp"

using namespace relunet;
using namespace relunet::poly;

namespace {

grid::GridSpec spec(long b, long ell, long d, Rational eps = make_rational(1, 1000)) {
  return grid::GridSpec{b, ell, d, std::move(eps)};
}

// Piecewise linear interpolant of x^2 at j / 2^s, evaluated directly.
Rational square_interp(const Rational& x, long s) {
  const Rational n(BigInt(1) << s);
  Rational ax = abs(x);
  Rational j(floor_of(ax * n));
  Rational lo = j / n, hi = (j + 1) / n;
  Rational w = (ax - lo) * n;
  return (1 - w) * lo * lo + w * hi * hi;
}

}  // namespace

TEST_CASE("basis_eval") {
  auto s = spec(2, 1, 1);
  CHECK(basis_eval(s, {1}, {2}, {make_rational(3, 4)}) == make_rational(1, 4));
  CHECK(basis_eval(s, {0}, {2}, {make_rational(3, 4)}) == 0);
  CHECK(basis_eval(s, {1}, {0}, {make_rational(3, 4)}) == 1);
  CHECK(basis_eval(s, {0}, {0}, {make_rational(1, 2)}) == 0);
  CHECK(basis_eval(s, {1}, {0}, {Rational(1)}) == 1);
  auto s2 = spec(3, 1, 2);
  CHECK(basis_eval(s2, {1, 2}, {1, 1}, {make_rational(1, 2), make_rational(5, 6)}) == make_rational(1, 4));
}

TEST_CASE("multi_indices") {
  CHECK(multi_indices(1, 2) == std::vector<MultiIndex>{{0}, {1}, {2}});
  CHECK(multi_indices(2, 1) == std::vector<MultiIndex>{{0, 0}, {1, 0}, {0, 1}});
  CHECK(multi_indices(3, 3).size() == 20);
}

TEST_CASE("square_net equals the dyadic interpolant") {
  for (long L : {1L, 2L}) {
    auto g = square_net(4, L);
    CHECK(net::size_of(g).width <= 4 * 16 + 1);
    CHECK(net::size_of(g).depth == static_cast<std::size_t>(L));
    CHECK(net::evaluate(g, {make_rational(1, 2)})[0] == make_rational(1, 4));
    CHECK(net::evaluate(g, {Rational(1)})[0] == 1);
    CHECK(net::evaluate(g, {Rational(-1)})[0] == 1);
    const long s = 4 * L;
    std::mt19937_64 rng(51);
    for (int r = 0; r < 300; ++r) {
      Rational x = make_rational(static_cast<long>(rng() % 20001) - 10000, 10000);
      Rational v = net::evaluate(g, {x})[0];
      CHECK(v == square_interp(x, s));
      CHECK(v - x * x >= 0);
      CHECK(v - x * x <= power(Rational(2), -2 * s - 2));
    }
  }
  CHECK_THROWS_AS(square_net(3, 1), InputError);
  auto g5 = square_net(5, 1);
  CHECK(net::size_of(g5).width <= 5 * 32 + 1);
}

TEST_CASE("square_net float grid error, k=4, L=2") {
  net::FloatEvaluator ev(net::lower(square_net(4, 2)));
  double worst = 0;
  for (int i = 0; i <= 100000; ++i) {
    double x = -1 + 2.0 * i / 100000;
    double e = ev.scalar(x) - x * x;
    CHECK(e >= -1e-15);
    worst = std::max(worst, e);
  }
  CHECK(worst <= std::ldexp(1.0, -18) + 1e-15);
}

TEST_CASE("product_net") {
  for (long L : {1L, 2L, 3L}) {
    auto f = product_net(4, L);
    CHECK(net::size_of(f).width <= 3 * 4 * 16 + 3);
    CHECK(net::size_of(f).depth == static_cast<std::size_t>(L));
    CHECK(net::evaluate(f, {Rational(1), Rational(1)})[0] == 1);
    const double bound = std::ldexp(1.0, static_cast<int>(-8 * L - 1));
    net::FloatEvaluator ev(net::lower(f));
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> u(-1, 1);
    double worst = 0;
    for (int r = 0; r < 10000; ++r) {
      double x = u(rng), y = u(rng);
      double v = ev({x, y})[0];
      CHECK(v >= -1);
      CHECK(v <= 1);
      worst = std::max(worst, std::abs(v - x * y));
    }
    CHECK(worst <= bound + 1e-15);
    std::mt19937_64 rq(53);
    for (int r = 0; r < 30; ++r) {
      Rational x = make_rational(static_cast<long>(rq() % 2001) - 1000, 1000);
      Rational y = make_rational(static_cast<long>(rq() % 2001) - 1000, 1000);
      Rational e = net::evaluate(f, {x, y})[0] - x * y;
      CHECK(e >= -power(Rational(2), -8 * L - 2));
      CHECK(e <= power(Rational(2), -8 * L - 1));
    }
  }
}

TEST_CASE("monomial_net") {
  auto p0 = monomial_net({0, 0}, 1, 1);
  CHECK(net::size_of(p0).depth == 0);
  CHECK(net::evaluate(p0, {make_rational(1, 3), make_rational(-1, 2), make_rational(2, 7)})[0] == make_rational(2, 7));
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(-1, 1);
  for (long W0 : {1L, 2L}) {
    for (long L0 : {1L, 2L}) {
      const double unit = std::ldexp(1.0, static_cast<int>(-2 * (W0 + 3) * L0 - 1));
      auto p1 = monomial_net({1, 0}, W0, L0);
      auto p3 = monomial_net({2, 1}, W0, L0);
      CHECK(net::size_of(p3).depth <= static_cast<std::size_t>(3 * L0));
      CHECK(net::size_of(p3).width <= static_cast<std::size_t>(24 * (W0 + 3) * (1L << W0) + 3 + 4));
      net::FloatEvaluator e1(net::lower(p1)), e3(net::lower(p3));
      for (int r = 0; r < 500; ++r) {
        double y1 = u(rng), y2 = u(rng), z = u(rng);
        CHECK(std::abs(e1({y1, y2, z})[0] - y1 * z) <= unit + 1e-14);
        CHECK(std::abs(e3({y1, y2, z})[0] - y1 * y1 * y2 * z) <= 3 * unit + 1e-14);
      }
    }
  }
}

TEST_CASE("quantization") {
  PiecewisePoly f{spec(2, 1, 1), 0, {}};
  f.coeffs[{{0}, {0}}] = 1;
  f.coeffs[{{1}, {0}}] = make_rational(3, 10);
  auto g = quantize_coeffs(f, Rational(3));
  CHECK(g.coeffs[{{0}, {0}}] == 1);
  CHECK(g.coeffs[{{1}, {0}}] == make_rational(1, 4));
  CHECK(quant_levels(2, Rational(3)) == 8);
  CHECK(quant_levels(2, make_rational(1, 2)) == 2);
  CHECK(quant_levels(3, make_rational(3, 2)) == 6);

  // ||a - a~||_inf <= b^-delta and ||u||_1 within the lift bound
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 300; ++rep) {
    long ell = 1 + rep % 4;
    PiecewisePoly h{spec(2, ell, 1), 0, {}};
    double q = rep % 3 == 0 ? kInf : 1 + static_cast<double>(rep % 4);
    long n = 1L << ell;
    std::vector<Rational> a;
    for (long i = 0; i < n; ++i) a.push_back(make_rational(static_cast<long>(rng() % 2001) - 1000, 1000));
    double norm = lq_norm(a, q);
    for (long i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] /= from_double(norm * 1.000001);
      h.coeffs[{{i}, {0}}] = a[static_cast<std::size_t>(i)];
    }
    Rational delta = make_rational(1 + static_cast<long>(rep % 5), 1 + rep % 2);
    auto hq = quantize_coeffs(h, delta);
    Rational Q(quant_levels(2, delta));
    long ell1 = 0;
    for (long i = 0; i < n; ++i) {
      Rational diff = abs(h.coeffs[{{i}, {0}}] - hq.coeffs[{{i}, {0}}]);
      CHECK(diff <= 1 / Q);
      ell1 += to_long(floor_of(abs(hq.coeffs[{{i}, {0}}]) * Q));
    }
    CHECK(ell1 <= lift_norm_bound(2, delta, q, 1, ell));
    CHECK(1 / to_double(Q) <= std::pow(2.0, -to_double(delta)) + 1e-15);
  }
}

TEST_CASE("pwpoly_net: indicator-weighted constants are exact") {
  PiecewisePoly f{spec(2, 2, 1), 0, {}};
  std::vector<long> pattern{1, 0, 1, 1};
  for (long i = 0; i < 4; ++i)
    if (pattern[static_cast<std::size_t>(i)]) f.coeffs[{{i}, {0}}] = 1;
  PolyApproxParams params;
  params.delta = Rational(2);
  params.S = 2;
  params.T = 1;
  params.W0 = 1;
  params.L0 = 2;
  auto g = pwpoly_net(f, params, make_rational(1, 40));
  for (long i = 0; i < 4; ++i) {
    Rational mid = make_rational(2 * i + 1, 8);
    CHECK(net::evaluate(g, {mid})[0] == pattern[static_cast<std::size_t>(i)]);
  }
  CHECK_THROWS_AS(pwpoly_net(f, params, make_rational(1, 4)), InputError);
}

TEST_CASE("pwpoly_net: single basis function and per-gamma branch") {
  auto s = spec(3, 1, 1, make_rational(1, 60));
  PiecewisePoly f{s, 2, {}};
  f.coeffs[{{1}, {2}}] = make_rational(3, 4);
  f.coeffs[{{2}, {1}}] = make_rational(-1, 2);
  PolyApproxParams params;
  params.delta = Rational(4);
  params.S = 2;
  params.T = 2;
  params.W0 = 2;
  params.L0 = 1;
  params.q = 2;
  params.p = kInf;
  auto g = pwpoly_net(f, params, s.eps);
  net::FloatEvaluator ev(net::lower(g));
  auto fq = quantize_coeffs(f, params.delta);
  std::mt19937_64 rng(56);
  double worst = 0;
  for (int r = 0; r < 2000; ++r) {
    Rational x = make_rational(static_cast<long>(rng() % 100000), 100000);
    if (!grid::locate(s, {x}).good) continue;
    worst = std::max(worst, std::abs(ev.scalar(to_double(x)) - to_double(eval(f, {x}))));
    // quantized coefficients (here exact in 3^-4 units up to the scale factor)
    CHECK(std::abs(ev.scalar(to_double(x)) - to_double(eval(fq, {x}))) <= 0.05);
  }
  CHECK(worst <= 2 * std::pow(3.0, -4) + 3 * std::ldexp(1.0, -11));

  auto mids = local_coordinates_net(s, 1);
  auto br = gamma_branch(f, {2}, params);
  for (long i = 0; i < 3; ++i) {
    Rational x = make_rational(6 * i + 2, 18);
    auto yi = net::evaluate(mids, {x});
    CHECK(yi[1] == i);
    CHECK(yi[0] == 3 * x - i);
    double want = to_double(br.scale) * (static_cast<double>(br.lift[static_cast<std::size_t>(i)]) / to_double(Rational(br.levels))) *
                  std::pow(to_double(yi[0]), 2);
    CHECK(std::abs(to_double(net::evaluate(br.net, yi)[0]) - want) <= 2 * std::ldexp(1.0, -11));
  }
}

TEST_CASE("piecewise polynomial documents") {
  PiecewisePoly f{spec(2, 1, 2, make_rational(1, 8)), 1, {}};
  f.coeffs[{{0, 1}, {1, 0}}] = make_rational(-2, 3);
  f.coeffs[{{1, 1}, {0, 0}}] = make_rational(1, 5);
  auto back = pwpoly_from_json(to_json(f));
  CHECK(back.coeffs == f.coeffs);
  CHECK(back.spec.eps == f.spec.eps);
  CHECK(eval(back, {make_rational(1, 4), make_rational(3, 4)}) == make_rational(-1, 3));
  CHECK(eval(back, std::vector<double>{0.25, 0.75}) == doctest::Approx(-1.0 / 3));
  CHECK_THROWS_AS(pwpoly_from_json("{\"b\":2,\"ell\":1,\"d\":1,\"k\":0,\"coeffs\":[{\"i\":[2],\"gamma\":[0],\"a\":1}]}"),
                  InputError);
  CHECK_THROWS_AS(pwpoly_from_json("{\"b\":2,\"ell\":1,\"d\":1,\"k\":0,\"coeffs\":[{\"i\":[1],\"gamma\":[1],\"a\":1}]}"),
                  InputError);
}
