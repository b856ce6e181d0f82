#include <cmath>
#include <random>

#include "doctest.h"
#include "relunet/codec.hpp"

using namespace relunet;
using namespace relunet::codec;

namespace {

std::string raw_bits(const SparseCode& c) {
  std::string s;
  for (auto b : c.bits.bits) s.push_back(static_cast<char>('0' + b));
  return s;
}

std::vector<Token> toks(std::initializer_list<std::pair<long, long>> l) {
  std::vector<Token> out;
  for (auto [f, t] : l) out.push_back({f, t});
  return out;
}

// Random vector with ||x||_1 <= M and ||x||_inf < S.
IntVector random_vector(std::mt19937_64& rng, long N, long M, long S) {
  IntVector v;
  v.x.assign(static_cast<std::size_t>(N), 0);
  std::uniform_int_distribution<long> pos(0, N - 1);
  long budget = std::uniform_int_distribution<long>(0, M)(rng);
  int style = static_cast<int>(rng() % 4);
  long cap = S - 1;
  while (budget > 0 && cap > 0) {
    auto& e = v.x[static_cast<std::size_t>(pos(rng))];
    long room = cap - std::labs(e);
    if (room <= 0) {
      if (std::all_of(v.x.begin(), v.x.end(), [&](long a) { return std::labs(a) >= cap; })) break;
      continue;
    }
    long add = std::uniform_int_distribution<long>(1, std::min(room, budget))(rng);
    long sign = style == 1 ? -1 : style == 2 ? 1 : (e != 0 ? (e > 0 ? 1 : -1) : (rng() % 2 ? 1 : -1));
    e += sign * add;
    budget -= add;
  }
  return v;
}

// Width/depth bound evaluated in floating point as an independent check of rep_plan.
net::SizeBudget formula_bound(long N, long M, long S, long T) {
  S = std::min(S, M);
  auto ceil_nudged = [](double v) { return static_cast<long>(std::ceil(v - 1e-9)); };
  if (N >= M) {
    long w1 = std::max(1L, ceil_nudged(std::sqrt(double(M)) / (double(S) * std::sqrt(double(T + 2)))));
    long q = std::max(1L, ceil_nudged(std::pow(double(N) / double(M), 1.0 / double(T))));
    return {static_cast<std::size_t>(22 * std::max(w1, q) + 10), static_cast<std::size_t>(4 * S * (T + 2))};
  }
  long w1 = std::max(1L, ceil_nudged(double(M) / (double(S) * std::sqrt(double(N) * double(T + 2)))));
  long q = std::max(1L, ceil_nudged(std::pow(double(M) / double(N), 1.0 / double(T))));
  long tau = (S * N + M - 1) / M;
  return {static_cast<std::size_t>(22 * std::max(w1, q) + 12), static_cast<std::size_t>(4 * tau * (T + 2))};
}

void check_rep(const IntVector& x, long M, long S, long T) {
  const long N = static_cast<long>(x.size());
  auto g = rep_net(x, M, S, T);
  auto bound = formula_bound(N, M, S, T);
  auto plan = rep_plan(N, M, S, T);
  CHECK(plan.bound.width == bound.width);
  CHECK(plan.bound.depth == bound.depth);
  CHECK(net::size_of(g).width <= bound.width);
  CHECK(net::size_of(g).depth <= bound.depth);
  bool ok = true;
  for (long n = 1; n <= N; ++n) ok = ok && net::evaluate(g, {Rational(n)})[0] == x.x[static_cast<std::size_t>(n - 1)];
  CHECK(ok);
}

}  // namespace

TEST_CASE("golden codes") {
  IntVector xs{{0, 0, -2, 0, 1}};
  auto cs = encode(xs, 4, 3);
  CHECK(cs.regime == Regime::Sparse);
  CHECK(cs.tokens == toks({{2, 0}, {1, -1}, {0, -1}, {2, 1}}));
  CHECK(raw_bits(cs) == "1000010100011010");
  CHECK(bits::bin_value(bits::BitString{cs.bits.bits, 0}) == make_rational(34074, 65536));
  CHECK(decode_reference(cs).x == xs.x);

  IntVector xd{{-4, 1, -2}};
  auto cd = encode(xd, 7, 5);
  CHECK(cd.regime == Regime::Dense);
  CHECK(cd.tokens == toks({{1, -3}, {0, -1}, {1, 1}, {1, -2}}));
  CHECK(raw_bits(cd) == "1011000111011010");
  CHECK(cd.anchors_i == std::vector<long>{1, 4, 5});
  CHECK(cd.anchors_j == std::vector<long>{0, 2, 3});
  CHECK(decode_reference(cd).x == xd.x);

  // The alternative sparse anchors (1,2,5)/(0,2,5) are equally valid.
  SparseCode alt = cs;
  alt.anchors_i = {1, 2, 5};
  alt.anchors_j = {0, 2, 5};
  CHECK_NOTHROW(check_anchors(alt));
  CHECK(decode_reference(alt).x == xs.x);
  auto [J, R] = staircase_nets(alt, 2, 5);
  CHECK(net::evaluate(J, {Rational(3)})[0] == 1);
  CHECK(net::evaluate(R, {Rational(3)})[0] == segment_code(alt, 1));
}

TEST_CASE("zero vector and errors") {
  IntVector z{{0, 0, 0, 0}};
  for (long M : {2L, 4L, 9L}) {
    auto c = encode(z, M, 2);
    for (const auto& t : c.tokens) CHECK(t.t == 0);
    CHECK(decode_reference(c).x == z.x);
    check_rep(z, M, 2, 1);
  }
  CHECK_THROWS_AS(encode(IntVector{{3, 0}}, 2, 5), InputError);
  CHECK_THROWS_AS(encode(IntVector{{2, 0}}, 4, 2), InputError);
  CHECK_THROWS_AS(encode(IntVector{{}}, 4, 2), InputError);
  SparseCode bad = encode(IntVector{{0, 0, -2, 0, 1}}, 4, 3);
  bad.anchors_j = {0, 3, 4};
  CHECK_THROWS_AS(check_anchors(bad), InputError);
  CHECK_THROWS_AS(decode_reference(bad), InputError);
  bad = encode(IntVector{{0, 0, -2, 0, 1}}, 4, 3);
  bad.bits.bits.pop_back();
  CHECK_THROWS_AS(decode_reference(bad), InputError);
  CHECK_THROWS_AS(rep_net(IntVector{{3, 3}}, 5, 2, 1), InputError);
}

TEST_CASE("layout widths") {
  auto s = layout(5, 4, 3);
  CHECK(s.f_width == 2);
  CHECK(s.t_width == 2);
  CHECK(s.tau == 3);
  auto d = layout(3, 7, 5);
  CHECK(d.f_width == 1);
  CHECK(d.t_width == 3);
  CHECK(d.tau == 3);
  CHECK(layout(8, 8, 2).regime == Regime::Sparse);
  CHECK(layout(17, 4, 2).f_width == 1 + 3);
  CHECK(layout(16, 4, 2).f_width == 1 + 2);
}

TEST_CASE("roundtrip property, both regimes") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 3000; ++rep) {
    bool sparse = rep % 2 == 0;
    long N, M;
    if (sparse) {
      N = std::uniform_int_distribution<long>(1, 300)(rng);
      M = std::uniform_int_distribution<long>(1, N)(rng);
    } else {
      N = std::uniform_int_distribution<long>(1, 60)(rng);
      M = std::uniform_int_distribution<long>(N + 1, 600)(rng);
    }
    long S = std::uniform_int_distribution<long>(1, M + 2)(rng);
    IntVector x = random_vector(rng, N, M, S);
    auto c = encode(x, M, S);
    CHECK(c.regime == (sparse ? Regime::Sparse : Regime::Dense));
    CHECK(static_cast<long>(c.tokens.size()) <= 2 * (sparse ? M : N) + 1);
    CHECK(decode_reference(c).x == x.x);
    CHECK(code_from_json(to_json(c)).tokens == c.tokens);
  }
  // boundary: full norm on one entry, all negative
  IntVector one{{0, 0, 0, 0, 0, 0, 6}};
  CHECK(decode_reference(encode(one, 6, 7)).x == one.x);
  IntVector neg{{-1, -1, -1, -1}};
  CHECK(decode_reference(encode(neg, 4, 2)).x == neg.x);
  CHECK(decode_reference(encode(neg, 10, 2)).x == neg.x);
}

TEST_CASE("json dump") {
  auto c = encode(IntVector{{0, 0, -2, 0, 1}}, 4, 3);
  auto back = code_from_json(to_json(c));
  CHECK(back.bits.bits == c.bits.bits);
  CHECK(back.anchors_i == c.anchors_i);
  CHECK(decode_reference(back).x == std::vector<long>{0, 0, -2, 0, 1});
  CHECK(to_json(c).find("\"bits\":\"0.1000010100011010\"") != std::string::npos);
  CHECK_THROWS_AS(code_from_json("{\"regime\":\"x\"}"), InputError);
}

TEST_CASE("staircases") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 40; ++rep) {
    long N = std::uniform_int_distribution<long>(1, 80)(rng);
    long M = std::uniform_int_distribution<long>(1, 120)(rng);
    long S = std::uniform_int_distribution<long>(1, 6)(rng);
    IntVector x = random_vector(rng, N, M, S);
    auto c = encode(x, M, S);
    auto plan = rep_plan(N, M, S, 1 + rep % 3);
    auto [J, R] = staircase_nets(c, plan.W1, plan.L1);
    CHECK(net::size_of(J).width <= static_cast<std::size_t>(6 * plan.W1 + 2));
    CHECK(net::size_of(J).depth <= static_cast<std::size_t>(2 * plan.L1));
    CHECK(net::size_of(R).width <= static_cast<std::size_t>(6 * plan.W1 + 2));
    CHECK(net::size_of(R).depth <= static_cast<std::size_t>(2 * plan.L1));
    long k = 0;
    for (long n = 1; n <= N; ++n) {
      while (n > c.anchors_j[static_cast<std::size_t>(k + 1)]) ++k;
      CHECK(net::evaluate(J, {Rational(n)})[0] == n - c.anchors_j[static_cast<std::size_t>(k)]);
      CHECK(net::evaluate(R, {Rational(n)})[0] == segment_code(c, k));
    }
    if (c.rho() == 1)
      for (long n = 1; n <= N; ++n) CHECK(net::evaluate(J, {Rational(n)})[0] == n);
  }
}

TEST_CASE("block step") {
  // sparse: f_width 2, tau 3 -> 24-bit register
  auto step = block_step_net(Regime::Sparse, 2, 2, 3, 1);
  CHECK(net::size_of(step).depth == 3);
  CHECK(net::size_of(step).width <= 16 * 2 + 8);
  auto reg = [](std::vector<std::uint8_t> b, std::size_t total) {
    b.resize(total, 0);
    return bits::fraction_value(b);
  };
  // token (1, +1) then zeros
  Rational r = reg({0, 1, 1, 0}, 24);
  auto hit = net::evaluate(step, {Rational(1), r, Rational(5)});
  CHECK(hit[0] == 0);
  CHECK(hit[1] == Rational(0));
  CHECK(hit[2] == 6);
  auto miss = net::evaluate(step, {Rational(3), r, Rational(5)});
  CHECK(miss[0] == 2);
  CHECK(miss[2] == 5);
  auto zero = net::evaluate(step, {Rational(0), Rational(0), Rational(-2)});
  CHECK(zero == std::vector<Rational>{0, 0, -2});

  // dense example chained 2 tau times decodes x_1 = -4 at n = 1
  auto c = encode(IntVector{{-4, 1, -2}}, 7, 5);
  auto dstep = block_step_net(Regime::Dense, c.f_width, c.t_width, c.tau, 2);
  CHECK(net::size_of(dstep).depth == 4);
  std::vector<Rational> state{Rational(1), segment_code(c, 0), Rational(0)};
  for (long i = 0; i < 2 * c.tau; ++i) state = net::evaluate(dstep, state);
  CHECK(state[2] == -4);
  CHECK(state[1] == 0);
}

TEST_CASE("rep_net examples") {
  IntVector xs{{0, 0, -2, 0, 1}};
  auto g = rep_net(xs, 4, 1, 1);
  CHECK(net::size_of(g).width <= 54);
  CHECK(net::size_of(g).depth <= 12);
  for (long n = 1; n <= 5; ++n) CHECK(net::evaluate(g, {Rational(n)})[0] == xs.x[static_cast<std::size_t>(n - 1)]);
  check_rep(xs, 4, 3, 1);
  check_rep(xs, 4, 3, 2);
  check_rep(IntVector{{-4, 1, -2}}, 7, 5, 1);
  check_rep(IntVector{{-4, 1, -2}}, 7, 2, 3);

  // S > M behaves as S = M
  auto big = rep_net(xs, 4, 9, 1);
  auto clamp = rep_net(xs, 4, 4, 1);
  CHECK(net::size_of(big).width == net::size_of(clamp).width);
  CHECK(net::size_of(big).depth == net::size_of(clamp).depth);
  for (long n = 1; n <= 5; ++n) CHECK(net::evaluate(big, {Rational(n)}) == net::evaluate(clamp, {Rational(n)}));

  // float mode
  auto f = net::lower(rep_net(IntVector{{0, 2, -1, 0, 0, 1, 0, 0}}, 4, 2, 2));
  net::FloatEvaluator ev(f);
  std::vector<long> want{0, 2, -1, 0, 0, 1, 0, 0};
  for (long n = 1; n <= 8; ++n) CHECK(std::abs(ev.scalar(double(n)) - double(want[static_cast<std::size_t>(n - 1)])) < 1e-6);
}

TEST_CASE("rep_net random configurations") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 30; ++rep) {
    bool sparse = rep % 2 == 0;
    long N = sparse ? std::uniform_int_distribution<long>(2, 40)(rng) : std::uniform_int_distribution<long>(2, 12)(rng);
    long M = sparse ? std::uniform_int_distribution<long>(1, N)(rng) : std::uniform_int_distribution<long>(N + 1, 60)(rng);
    long S = std::uniform_int_distribution<long>(1, 5)(rng);
    long T = std::uniform_int_distribution<long>(1, 3)(rng);
    IntVector x = random_vector(rng, N, M, M + 1);
    check_rep(x, M, S, T);
  }
}
