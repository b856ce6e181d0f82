#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "relunet/sobolev.hpp"

using namespace relunet;
using namespace relunet::sobolev;

namespace {

constexpr double kPi = 3.14159265358979323846;

TargetFunction custom(std::function<double(const std::vector<double>&)> fn, long s, Exponent q = Exponent::infinity()) {
  TargetFunction f;
  f.name = "custom";
  f.dim = 1;
  f.s = Rational(s);
  f.q = q;
  f.eval = std::move(fn);
  return f;
}

double coeff(const poly::PiecewisePoly& f, const grid::GridIndex& i, const poly::MultiIndex& g) {
  auto it = f.coeffs.find({i, g});
  return it == f.coeffs.end() ? 0.0 : to_double(it->second);
}

// Anchor-set gap by enumeration: all j / B_i, deduplicated.
Rational brute_gap(const std::vector<long>& bases, const std::vector<long>& ells) {
  std::set<Rational> anchors;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const long B = to_long(ipow(bases[i], static_cast<unsigned long>(ells[i])));
    for (long j = 0; j <= B; ++j) anchors.insert(make_rational(j, B));
  }
  Rational gap(1);
  for (auto it = std::next(anchors.begin()); it != anchors.end(); ++it)
    gap = std::min(gap, Rational(*it - *std::prev(it)));
  return gap;
}

}  // namespace

TEST_CASE("exponent parsing") {
  CHECK(Exponent::parse("inf").is_inf());
  CHECK(Exponent::parse("2").inv == make_rational(1, 2));
  CHECK(Exponent::parse("3/2").inv == make_rational(2, 3));
  CHECK(Exponent::of(4).str() == "4");
  CHECK(Exponent::infinity().str() == "inf");
  CHECK(Exponent::of(2).value() == 2.0);
  CHECK_THROWS_AS(Exponent::parse("1/2"), InputError);
  CHECK_THROWS_AS(Exponent::parse("abc"), InputError);
}

TEST_CASE("gauss_legendre integrates polynomials of degree 2n-1") {
  for (int n : {1, 2, 4, 6}) {
    Quadrature rule = gauss_legendre(n);
    REQUIRE(rule.nodes.size() == static_cast<std::size_t>(n));
    for (int deg = 0; deg <= 2 * n - 1; ++deg) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += rule.weights[static_cast<std::size_t>(i)] * std::pow(rule.nodes[static_cast<std::size_t>(i)], deg);
      CHECK(acc == doctest::Approx(1.0 / (deg + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("projection reproduces polynomials and fits x^2 by x - 1/6") {
  grid::GridSpec level0{2, 0, 1, Rational(0)};
  auto sq = custom([](const std::vector<double>& x) { return x[0] * x[0]; }, 2);
  auto lin = project(sq, level0, 1);
  CHECK(coeff(lin, {0}, {0}) == doctest::Approx(-1.0 / 6).epsilon(1e-10));
  CHECK(coeff(lin, {0}, {1}) == doctest::Approx(1.0).epsilon(1e-10));

  auto line = custom([](const std::vector<double>& x) { return 3 * x[0] - 1; }, 1);
  grid::GridSpec level2{3, 2, 1, Rational(0)};
  auto pl = project(line, level2, 1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int r = 0; r < 50; ++r) {
    double x = u(rng);
    CHECK(std::abs(poly::eval(pl, std::vector<double>{x}) - (3 * x - 1)) < 1e-10);
  }
  auto constant = custom([](const std::vector<double>&) { return 0.25; }, 1);
  auto pc = project(constant, level2, 0);
  for (long i = 0; i < 9; ++i) CHECK(coeff(pc, {i}, {0}) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("projection in two dimensions reproduces degree-k polynomials") {
  TargetFunction f = custom([](const std::vector<double>& x) { return x[0] * x[1] + x[1] * x[1] - x[0]; }, 2);
  f.dim = 2;
  grid::GridSpec spec{2, 1, 2, Rational(0)};
  auto pp = project(f, spec, 2);
  for (double a : {0.1, 0.4, 0.77})
    for (double b : {0.05, 0.5, 0.93})
      CHECK(std::abs(poly::eval(pp, std::vector<double>{a, b}) - f.eval({a, b})) < 1e-10);
}

TEST_CASE("multilevel decomposition telescopes") {
  auto f = make_target("sin", 1, Rational(2), Exponent::infinity());
  const long ell_star = 5;
  auto parts = multilevel_decompose(f, 2, ell_star, 2);
  REQUIRE(parts.size() == static_cast<std::size_t>(ell_star + 1));
  for (long l = 0; l <= ell_star; ++l) CHECK(parts[static_cast<std::size_t>(l)].spec.ell == l);
  auto top = project(f, grid::GridSpec{2, ell_star, 1, Rational(0)}, 2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int r = 0; r < 200; ++r) {
    std::vector<double> x{u(rng)};
    double acc = 0;
    for (const auto& p : parts) acc += poly::eval(p, x);
    CHECK(std::abs(acc - poly::eval(top, x)) < 1e-9);
  }
  // refine + subtract against the exact path
  auto fine0 = refine(parts[0], 1);
  auto p1 = project(f, grid::GridSpec{2, 1, 1, Rational(0)}, 2);
  auto diff = subtract(p1, fine0);
  for (double x : {0.1, 0.3, 0.6, 0.9})
    CHECK(std::abs(poly::eval(diff, std::vector<double>{x}) - poly::eval(parts[1], std::vector<double>{x})) < 1e-9);
}

TEST_CASE("polynomial pieces vanish after the last knot level") {
  // cubic B-spline of 4x has knots at j/4, so base-2 projections with k = 3 are exact from level 2 on
  auto f = make_target("bspline", 1, Rational(3), Exponent::infinity());
  auto parts = multilevel_decompose(f, 3, 5, 2);
  for (long l = 3; l <= 5; ++l) CHECK(coeff_norm(parts[static_cast<std::size_t>(l)], Exponent::infinity()) < 1e-9);
  CHECK(coeff_norm(parts[2], Exponent::infinity()) > 1e-3);
  auto tables = multilevel_tables(f, 3, 5, 2);
  for (long l = 3; l <= 5; ++l) CHECK(coeff_norm(tables[static_cast<std::size_t>(l)], Exponent::of(2)) < 1e-9);
}

TEST_CASE("coefficient norms stay below C b^{(d/q - s) l} for sin") {
  for (long qv : {2L, 0L}) {
    const Exponent q = qv ? Exponent::of(qv) : Exponent::infinity();
    const double dq = qv ? 1.0 / static_cast<double>(qv) : 0.0;
    auto f = make_target("sin", 1, Rational(2), q);
    auto tables = multilevel_tables(f, 2, 8, 2);
    std::vector<double> ratio, norms;
    for (long l = 1; l <= 8; ++l) {
      norms.push_back(coeff_norm(tables[static_cast<std::size_t>(l)], q));
      ratio.push_back(norms.back() * std::pow(2.0, (2 - dq) * static_cast<double>(l)));
    }
    for (double r : ratio) CHECK(r <= 10 * ratio.front());
    // sin is smoother than W^{2,q}: the degree-2 pieces decay one order faster
    std::vector<double> lv, nv;
    for (long l = 3; l <= 8; ++l) {
      lv.push_back(std::pow(2.0, static_cast<double>(l)));
      nv.push_back(norms[static_cast<std::size_t>(l - 1)]);
    }
    CHECK(fit_slope(lv, nv) == doctest::Approx(-(3 - dq)).epsilon(0.05));
  }
}

TEST_CASE("embedding condition") {
  CHECK_NOTHROW(check_embedding(Rational(1), Exponent::of(2), Exponent::of(1), 1));
  CHECK_THROWS_AS(check_embedding(Rational(1), Exponent::of(1), Exponent::of(2), 1), InputError);
  // boundary 1/q - 1/p = s/d is rejected
  CHECK_THROWS_AS(check_embedding(Rational(1), Exponent::infinity(), Exponent::of(1), 1), InputError);
  CHECK_THROWS_AS(check_embedding(Rational(0), Exponent::of(2), Exponent::of(2), 1), InputError);
  CHECK_THROWS_AS(schedule(Rational(2), Exponent::infinity(), Exponent::infinity(), 1, 1, 1, 1), InputError);
  CHECK_THROWS_AS(schedule(Rational(2), Exponent::infinity(), Exponent::infinity(), 1, 2, 0, 1), InputError);
}

TEST_CASE("schedule in the linear regime p = q") {
  for (long base : {2L, 3L})
    for (long alpha : {1L, 2L, 3L})
      for (long beta : {1L, 2L}) {
        Schedule sc = schedule(Rational(2), Exponent::infinity(), Exponent::infinity(), 1, base, alpha, beta);
        CHECK(sc.kappa == 1);
        CHECK(sc.tau == 0);
        CHECK(sc.ell_star == 2 * (alpha + beta));
        CHECK(sc.levels.size() == static_cast<std::size_t>(sc.ell_star + 1));
        CHECK(sc.levels_in_case(3).empty());
        CHECK(sc.levels_in_case(4).empty());
        CHECK(sc.levels_in_case(1).size() == static_cast<std::size_t>(2 * beta + 1));
        CHECK(sc.levels_in_case(2).size() == static_cast<std::size_t>(2 * alpha));
        CHECK(sc.levels[0].delta == 3 * 2 * (alpha + beta));
        CHECK(sc.L0 == 12 * beta);
        // 4^W0 >= b^alpha > 4^(W0-1)
        CHECK(ipow(4, static_cast<unsigned long>(sc.W0)) >= ipow(base, static_cast<unsigned long>(alpha)));
        if (sc.W0 > 1)
          CHECK(ipow(4, static_cast<unsigned long>(sc.W0 - 1)) < ipow(base, static_cast<unsigned long>(alpha)));
      }
  Schedule sc = schedule(Rational(1), Exponent::of(2), Exponent::of(2), 1, 2, 1, 1);
  CHECK(sc.kappa == 1);
  CHECK(sc.levels[2].delta == make_rational(1, 2) * 2 + 2 * (4 - 2));
}

TEST_CASE("schedule in the nonlinear regime p > q") {
  // s = 1, q = 1, p = 2: kappa = 2, tau = (1 / (1 - 1/2) - 1) / 2 = 1/2
  Schedule a = schedule(Rational(1), Exponent::of(2), Exponent::of(1), 1, 7, 1, 1);
  CHECK(a.kappa == 2);
  CHECK(a.tau == make_rational(1, 2));
  CHECK(a.ell_star == 8);
  CHECK(a.levels_in_case(3) == std::vector<long>{5, 6, 7, 8});
  CHECK(a.levels_in_case(4).empty());
  Schedule b = schedule(Rational(1), Exponent::of(2), Exponent::of(1), 1, 2, 2, 3);
  CHECK(b.ell_star == 20);
  CHECK(b.levels_in_case(3).size() == 8);
  CHECK(b.levels_in_case(4) == std::vector<long>{19, 20});
  for (long l : b.levels_in_case(3)) CHECK(b.levels[static_cast<std::size_t>(l)].S == 8);
  // level deltas decrease through the large-level cases
  for (long l = 11; l <= 20; ++l)
    CHECK(b.levels[static_cast<std::size_t>(l)].delta < b.levels[static_cast<std::size_t>(l - 1)].delta);
}

TEST_CASE("median_net examples and size") {
  auto m2 = median_net(2, 1);
  CHECK(net::evaluate(m2, {make_rational(1, 5), make_rational(7, 10)})[0] == make_rational(7, 10));
  auto m4 = median_net(4, 2);
  CHECK(net::evaluate(m4, {Rational(1), Rational(3), Rational(2), Rational(0)})[0] == 2);
  for (long k = 1; k <= 4; ++k) {
    const long d = 1L << k;
    auto g = median_net(d, 1);
    CHECK(g.width() <= static_cast<std::size_t>(4 * d));
    CHECK(g.depth() == static_cast<std::size_t>(k * (k + 1) / 2));
  }
  CHECK_THROWS_AS(median_net(6, 1), InputError);
  CHECK_THROWS_AS(median_net(4, 0), InputError);
  CHECK_THROWS_AS(median_net(4, 5), InputError);
}

TEST_CASE("median_net on permutations of 1..8") {
  std::vector<net::Network> nets;
  for (long j = 1; j <= 8; ++j) nets.push_back(median_net(8, j));
  std::vector<long> perm(8);
  std::iota(perm.begin(), perm.end(), 1);
  std::mt19937_64 rng(3);
  for (int r = 0; r < 400; ++r) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Rational> x(perm.begin(), perm.end());
    for (long j = 1; j <= 8; ++j) CHECK(net::evaluate(nets[static_cast<std::size_t>(j - 1)], x)[0] == 9 - j);
  }
}

TEST_CASE("median_net with ties and negative rationals") {
  auto g = median_net(4, 3);
  CHECK(net::evaluate(g, {Rational(-1), Rational(-1), make_rational(1, 3), Rational(2)})[0] == -1);
  std::mt19937_64 rng(17);
  auto g8 = median_net(8, 4);
  for (int r = 0; r < 200; ++r) {
    std::vector<Rational> x;
    for (int i = 0; i < 8; ++i) x.push_back(make_rational(static_cast<long>(rng() % 21) - 10, 1 + static_cast<long>(rng() % 4)));
    auto sorted = x;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    CHECK(net::evaluate(g8, x)[0] == sorted[3]);
  }
}

TEST_CASE("primes and trifling eps") {
  CHECK(primes(5) == std::vector<long>{2, 3, 5, 7, 11});
  CHECK(primes(1) == std::vector<long>{2});
  const std::vector<std::pair<std::vector<long>, std::vector<long>>> cases{
      {{2, 3}, {2, 1}}, {{2, 3, 5, 7}, {3, 2, 1, 1}}, {{2, 3, 5, 7}, {4, 2, 2, 1}}, {{3, 5}, {2, 2}}};
  for (const auto& [bases, ells] : cases) CHECK(trifling_eps(bases, ells) == brute_gap(bases, ells) / 2);
  CHECK_THROWS_AS(trifling_eps({2, 4}, {1, 1}), InputError);
  CHECK_THROWS_AS(trifling_eps({2, 3}, {1}), InputError);
}

TEST_CASE("sobolev norm estimate") {
  auto c = custom([](const std::vector<double>&) { return 0.7; }, 1, Exponent::of(2));
  CHECK(sobolev_norm_estimate(c) == doctest::Approx(0.7).epsilon(1e-6));
  auto id = custom([](const std::vector<double>& x) { return x[0]; }, 1, Exponent::of(2));
  CHECK(sobolev_norm_estimate(id) == doctest::Approx(std::sqrt(4.0 / 3)).epsilon(1e-6));
  auto sn = make_target("sin", 1, Rational(2), Exponent::of(2));
  CHECK(sn.declared_norm == doctest::Approx(std::sqrt(0.5 + std::pow(2 * kPi, 4) / 2)).epsilon(1e-4));
  auto half = custom([](const std::vector<double>& x) { return x[0]; }, 1);
  half.s = make_rational(1, 2);
  CHECK_THROWS_AS(sobolev_norm_estimate(half), InputError);
  // q = 1 closed form: int |x-1/2|^{1/2} dx = (4/3) 2^{-3/2}, int (1/2)|x-1/2|^{-1/2} dx = 2^{1/2}
  auto ap = make_target("abs-power", 1, Rational(1), Exponent::of(1));
  CHECK(ap.declared_norm == doctest::Approx(4.0 / 3 * std::pow(0.5, 1.5) + std::sqrt(2.0)).epsilon(1e-12));
  auto unit = make_target("abs-power", 1, Rational(1), Exponent::of(1), ap.declared_norm);
  CHECK(unit.declared_norm == doctest::Approx(1.0));
  CHECK(unit.eval({0.0}) == doctest::Approx(std::sqrt(0.5) / ap.declared_norm));
}

TEST_CASE("target presets and JSON") {
  for (const char* id : {"sin", "gaussian-bump", "abs-power", "bspline"}) {
    auto f = make_target(id, 2, Rational(1), Exponent::of(2));
    CHECK(f.dim == 2);
    CHECK(std::isfinite(f.eval({0.3, 0.6})));
  }
  CHECK_THROWS_AS(make_target("nope", 1, Rational(1), Exponent::of(2)), InputError);
  CHECK_THROWS_AS(make_target("sin", 0, Rational(1), Exponent::of(2)), InputError);
  Exponent p = Exponent::infinity();
  auto f = target_from_json(R"({"name":"t","d":1,"s":2,"q":"inf","p":"inf","expr":"sin"})", &p);
  CHECK(f.name == "t");
  CHECK(p.is_inf());
  CHECK(f.s == 2);
  CHECK(f.eval({0.25}) == doctest::Approx(1.0));
  auto g = target_from_json(R"({"d":1,"s":1,"q":1,"p":2,"expr":"abs-power","normalize":true})", &p);
  CHECK(p.inv == make_rational(1, 2));
  CHECK(g.declared_norm == doctest::Approx(1.0));
  CHECK_THROWS_AS(target_from_json("{", &p), InputError);
  CHECK_THROWS_AS(target_from_json(R"({"d":1,"expr":"sin"})", &p), InputError);
}

TEST_CASE("fit_slope and lp_error") {
  std::vector<double> x{1e3, 1e4, 1e5, 1e6}, y;
  for (double v : x) y.push_back(std::pow(v, -4.0));
  CHECK(fit_slope(x, y) == doctest::Approx(-4.0).epsilon(1e-12));
  y.clear();
  for (double v : x) y.push_back(7 * std::pow(v, -1.5));
  CHECK(fit_slope(x, y) == doctest::Approx(-1.5).epsilon(1e-12));

  auto id = custom([](const std::vector<double>& v) { return v[0]; }, 1);
  net::Network zero = net::affine({{Rational(0)}}, {Rational(0)});
  RateOptions opt;
  opt.points = 4000;
  CHECK(lp_error(id, zero, Exponent::infinity(), opt) > 0.999);
  CHECK(lp_error(id, zero, Exponent::of(2), opt) == doctest::Approx(std::sqrt(1.0 / 3)).epsilon(1e-3));
  opt.mode = net::Mode::Float;
  const double a = lp_error(id, zero, Exponent::of(1), opt);
  CHECK(a == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(lp_error(id, zero, Exponent::of(1), opt) == a);  // seeded
  opt.points = 0;
  CHECK_THROWS_AS(lp_error(id, zero, Exponent::of(1), opt), InputError);
}

TEST_CASE("assemble_part on a polynomial and on sin") {
  auto quad = custom([](const std::vector<double>& x) { return 0.5 * x[0] * x[0] - 0.25 * x[0]; }, 2);
  const Rational eps = make_rational(1, 1 << 12);
  PartNetwork part = assemble_part(quad, Exponent::infinity(), 2, 1, 1, eps);
  CHECK(part.plan.ell_star == 4);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  grid::GridSpec top{2, part.plan.ell_star, 1, eps};
  int checked = 0;
  while (checked < 12) {
    Rational x = from_double(u(rng));
    if (!grid::locate(top, {x}).good) continue;
    ++checked;
    double gv = to_double(net::evaluate(part.net, {x})[0]);
    CHECK(std::abs(gv - quad.eval({to_double(x)})) < 1e-3);
  }
  CHECK_THROWS_AS(assemble_part(quad, Exponent::infinity(), 2, 1, 1, make_rational(1, 16)), InputError);
  CHECK_THROWS_AS(assemble_part(quad, Exponent::infinity(), 2, 1, 1, Rational(0)), InputError);
}

TEST_CASE("assemble_full requires m, n at least the largest base") {
  auto f = make_target("sin", 1, Rational(2), Exponent::infinity());
  CHECK_THROWS_AS(assemble_full(f, Exponent::infinity(), 6, 8), InputError);
  CHECK_THROWS_AS(assemble_full(f, Exponent::of(1), 8, 8), InputError);  // q > p
}

TEST_CASE("rate report csv") {
  RateReport rep;
  rep.target = "sin";
  rep.rows.push_back(RateRow{8, 8, 10, 20, 0.5, 0.25, 0});
  const std::string csv = rep.csv();
  CHECK(csv.rfind("m,n,W,L,WL,error,predicted,slope_so_far\n", 0) == 0);
  CHECK(csv.find("8,8,10,20,200,") != std::string::npos);
}
