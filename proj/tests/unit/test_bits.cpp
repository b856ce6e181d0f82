#include <random>

#include "doctest.h"
#include "relunet/bits.hpp"
#include "relunet/pwl.hpp"

using namespace relunet;
using namespace relunet::bits;

namespace {

std::vector<std::uint8_t> bits_of(unsigned long v, int n) {
  std::vector<std::uint8_t> b(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) b[static_cast<std::size_t>(i)] = (v >> (n - 1 - i)) & 1;
  return b;
}

Rational frac(const std::vector<std::uint8_t>& b, std::size_t from) {
  Rational v(0), w(1, 2);
  for (std::size_t i = from; i < b.size(); ++i, w /= 2)
    if (b[i]) v += w;
  return v;
}

Rational head_int(const std::vector<std::uint8_t>& b, int m) {
  Rational v(0);
  for (int i = 0; i < m; ++i) v = 2 * v + b[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

TEST_CASE("bin_value and text form") {
  CHECK(bin_value(BitString::parse("0.101")) == make_rational(5, 8));
  CHECK(bin_value(BitString::parse("10.0")) == 2);
  CHECK(bin_value(BitString::parse("0.1000010100011010")) == make_rational(34074, 65536));
  CHECK(BitString::parse("0.1011").str() == "0.1011");
  CHECK(BitString::parse("10.0").str() == "10.0");
  CHECK_THROWS_AS(BitString::parse("0.12"), InputError);
  CHECK(fraction_value({1, 1}) == make_rational(3, 4));
}

TEST_CASE("extract_heads examples and sizes") {
  auto heads = extract_heads(3, 2);
  CHECK(net::evaluate(heads, {make_rational(5, 8)}) == std::vector<Rational>{1, 0, make_rational(1, 2)});
  auto one = extract_heads(3, 1);
  CHECK(net::evaluate(one, {make_rational(5, 8)}) == std::vector<Rational>{1, make_rational(1, 4)});
  for (int n = 1; n <= 7; ++n)
    for (int m = 1; m <= n; ++m) {
      auto f = extract_heads(n, m);
      CHECK(net::size_of(f).depth == 1);
      CHECK(net::size_of(f).width <= (std::size_t{1} << (m + 2)) + 1);
    }
  CHECK_THROWS_AS(extract_heads(2, 3), InputError);
  CHECK_THROWS_AS(extract_heads(2, 0), InputError);
}

TEST_CASE("extract_heads exhaustive, n <= 8") {
  for (int n = 1; n <= 8; ++n)
    for (int m = 1; m <= n; ++m) {
      auto f = extract_heads(n, m);
      for (unsigned long v = 0; v < (1ul << n); ++v) {
        auto b = bits_of(v, n);
        auto y = net::evaluate(f, {frac(b, 0)});
        bool ok = true;
        for (int i = 0; i < m; ++i) ok = ok && y[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)];
        ok = ok && y[static_cast<std::size_t>(m)] == frac(b, static_cast<std::size_t>(m));
        CHECK(ok);
      }
    }
}

TEST_CASE("extract_stream example, collapse and exhaustive n <= 7") {
  auto s = extract_stream(4, 2, 1);
  CHECK(net::evaluate(s, {make_rational(11, 16)}) == std::vector<Rational>{2, make_rational(3, 8)});
  auto collapsed = extract_stream(6, 3, 9);
  CHECK(net::size_of(collapsed).width <= 10);
  CHECK(net::size_of(collapsed).depth <= 3);
  for (int n = 1; n <= 7; ++n)
    for (int m = 1; m <= n; ++m)
      for (int L = 1; L <= m + 1; ++L) {
        auto inc = extract_stream(n, m, L);
        auto exc = extract_stream_exclusive(n, m, L);
        int Lm = std::min(L, m);
        std::size_t bound = (std::size_t{1} << ((m + Lm - 1) / Lm + 2)) + 2;
        CHECK(net::size_of(inc).width <= bound);
        CHECK(net::size_of(inc).depth <= static_cast<std::size_t>(L));
        for (unsigned long v = 0; v < (1ul << n); ++v) {
          auto b = bits_of(v, n);
          auto yi = net::evaluate(inc, {frac(b, 0)});
          auto ye = net::evaluate(exc, {frac(b, 0)});
          CHECK(yi[0] == head_int(b, m));
          CHECK(yi[1] == frac(b, static_cast<std::size_t>(m - 1)));
          CHECK(ye[0] == head_int(b, m));
          CHECK(ye[1] == frac(b, static_cast<std::size_t>(m)));
        }
      }
}

TEST_CASE("extract_stream random long inputs") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    int n = 11 + rep % 14;
    int m = 1 + static_cast<int>(rng() % static_cast<unsigned long>(n));
    int min_L = (m + 7) / 8;  // keeps chunks <= 8 bits (width 2^10 + 2)
    int L = min_L + static_cast<int>(rng() % 6);
    auto f = extract_stream(n, m, L);
    auto b = bits_of(rng() & ((1ul << n) - 1), n);
    auto y = net::evaluate(f, {frac(b, 0)});
    CHECK(y[0] == head_int(b, m));
    CHECK(y[1] == frac(b, static_cast<std::size_t>(m - 1)));
  }
}

TEST_CASE("sawtooth and delta") {
  CHECK(net::evaluate(sawtooth_net(1), {make_rational(1, 4)})[0] == make_rational(1, 2));
  CHECK(net::evaluate(sawtooth_net(2), {make_rational(1, 4)})[0] == 1);
  for (int i = 1; i <= 6; ++i) {
    auto t = sawtooth_net(i);
    CHECK(net::size_of(t).depth == 1);
    CHECK(net::size_of(t).width <= (std::size_t{1} << i) + 1);
    for (long j = 0; j <= (1l << i); ++j)
      CHECK(net::evaluate(t, {make_rational(j, 1l << i)})[0] == Rational(j % 2));
    CHECK(net::evaluate(t, {Rational(-1)})[0] == 0);
    CHECK(net::evaluate(t, {Rational(2)})[0] == 0);
    auto half = sawtooth_halfline_net(i);
    CHECK(net::size_of(half).width <= (std::size_t{1} << i));
    for (long j = 0; j <= 4 * (1l << i); ++j) {
      Rational x = make_rational(j, 4l << i);
      CHECK(net::evaluate(half, {x}) == net::evaluate(t, {x}));
    }
    if (i >= 2) {
      // T_i = T_{i-1} o T_1 as functions
      auto composed = net::compose(sawtooth_net(1), sawtooth_net(i - 1));
      for (long j = -3; j <= 4 * (1l << i) + 3; ++j) {
        Rational x = make_rational(j, 4l << i);
        CHECK(net::evaluate(composed, {x}) == net::evaluate(t, {x}));
      }
    }
  }
  auto h = delta_net();
  CHECK(net::size_of(h).width <= 3);
  CHECK(net::size_of(h).depth == 1);
  CHECK(net::evaluate(h, {Rational(0)})[0] == 1);
  CHECK(net::evaluate(h, {make_rational(1, 2)})[0] == make_rational(1, 2));
  for (long z = -6; z <= 6; ++z) CHECK(net::evaluate(h, {Rational(z)})[0] == (z == 0 ? 1 : 0));
}
