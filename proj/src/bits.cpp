// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#include "relunet/bits.hpp"

#include "relunet/pwl.hpp"

namespace relunet::bits {

using net::AffineLayer;
using net::Term;
using net::Network;

BitString BitString::parse(const std::string& text) {
  BitString b;
  bool seen_point = false;
  for (char c : text) {
    if (c == '0' || c == '1') {
      b.bits.push_back(static_cast<std::uint8_t>(c - '0'));
    } else if (c == '.' && !seen_point) {
      seen_point = true;
      b.point = b.bits.size();
    } else {
      throw InputError("malformed bit string '" + text + "'");
    }
  }
  if (!seen_point) b.point = b.bits.size();
  return b;
}

std::string BitString::str() const {
  std::string s;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (i == point) s += point == 0 ? "0." : ".";
    s.push_back(static_cast<char>('0' + bits[i]));
  }
  if (point == bits.size()) s += point == 0 ? "0.0" : ".0";
  return s;
}

Rational bin_value(const BitString& b) {
  BigInt acc = 0;
  for (auto bit : b.bits) acc = 2 * acc + bit;
  return make_rational(acc, BigInt(1)) /
         Rational(ipow(2, static_cast<unsigned long>(b.bits.size() - b.point)));
}

Rational fraction_value(const std::vector<std::uint8_t>& bits) { return bin_value(BitString{bits, 0}); }

Rational ramp_eps(int n) { return power(Rational(2), -(n + 1)); }

namespace {

struct Expr {
  std::vector<Term> terms;
  Rational bias{0};
};

Expr input_expr() { return Expr{{{0, Rational(1)}}, Rational(0)}; }

void add_row(AffineLayer& layer, std::size_t row, const Expr& e, const Rational& scale = 1,
             const Rational& offset = 0) {
  for (const auto& t : e.terms) layer.add(row, t.col, scale * t.value);
  layer.bias[row] += scale * e.bias + offset;
}

struct Stage {
  std::size_t first_ramp = 0;  // hidden index of ramp 1's first neuron
  std::size_t ramps = 0;       // 2^c - 1
  Rational inv_eps;
  // g_j = inv_eps * (h[b] - h[b+1] - h[b+2] + h[b+3]) with b = first_ramp + 4(j-1)
  void add_ramp(Expr& e, std::size_t j, const Rational& coef) const {
    std::size_t b = first_ramp + 4 * (j - 1);
    Rational k = coef * inv_eps;
    e.terms.push_back({static_cast<std::uint32_t>(b), k});
    e.terms.push_back({static_cast<std::uint32_t>(b + 1), -k});
    e.terms.push_back({static_cast<std::uint32_t>(b + 2), -k});
    e.terms.push_back({static_cast<std::uint32_t>(b + 3), k});
  }
};

// Hidden layer holding the ramps g_1..g_{2^c-1} of r, starting at row 0.
Stage ramp_rows(AffineLayer& layer, const Expr& r, int c, const Rational& eps) {
  Stage st;
  st.ramps = (std::size_t{1} << c) - 1;
  st.inv_eps = 1 / eps;
  const Rational cell = power(Rational(2), -c);
  for (std::size_t j = 1; j <= st.ramps; ++j) {
    Rational a = cell * static_cast<unsigned long>(j);
    Rational b = a + cell;
    const Rational cuts[4] = {a - eps, a, b - eps, b};
    for (int q = 0; q < 4; ++q) add_row(layer, 4 * (j - 1) + q, r, 1, -cuts[q]);
  }
  return st;
}

Network stream(int n, int m, int L, bool inclusive) {
  if (m < 1 || m > n) throw InputError("extract_stream: need 1 <= m <= n");
  if (L < 1) throw InputError("extract_stream: need L >= 1");
  const int Lm = std::min(L, m);
  const int chunk = (m + Lm - 1) / Lm;
  const int stages = (m + chunk - 1) / chunk;
  const Rational eps = ramp_eps(n);

  std::vector<AffineLayer> layers;
  Expr r = input_expr();
  Expr I;  // running integer part, absent before the first stage
  std::size_t prev_dim = 1;
  Expr lsb;
  for (int s = 0; s < stages; ++s) {
    const int c = s + 1 == stages ? m - chunk * (stages - 1) : chunk;
    const std::size_t ramps = (std::size_t{1} << c) - 1;
    const bool carry_int = s > 0;
    const std::size_t r_row = 4 * ramps;
    const std::size_t i_row = r_row + 1;
    AffineLayer layer(r_row + 1 + (carry_int ? 1 : 0), prev_dim);
    Stage st = ramp_rows(layer, r, c, eps);
    add_row(layer, r_row, r);
    if (carry_int) add_row(layer, i_row, I);

    const Rational scale(BigInt(1) << c);
    Expr nI, nr;
    if (carry_int) nI.terms.push_back({static_cast<std::uint32_t>(i_row), scale});
    nr.terms.push_back({static_cast<std::uint32_t>(r_row), scale});
    lsb = Expr{};
    for (std::size_t j = 1; j <= ramps; ++j) {
      st.add_ramp(nI, j, Rational(static_cast<unsigned long>(j)));
      st.add_ramp(nr, j, -Rational(static_cast<unsigned long>(j)));
      if (j & 1) st.add_ramp(lsb, j, Rational(1));
    }
    prev_dim = layer.out_dim();
    layers.push_back(std::move(layer));
    I = std::move(nI);
    r = std::move(nr);
  }
  AffineLayer out(2, prev_dim);
  add_row(out, 0, I);
  if (inclusive) {
    add_row(out, 1, r, Rational(1, 2));
    add_row(out, 1, lsb, Rational(1, 2));
  } else {
    add_row(out, 1, r);
  }
  layers.push_back(std::move(out));
  return Network(1, std::move(layers));
}

}  // namespace

Network extract_heads(int n, int m) {
  if (m < 1 || m > n) throw InputError("extract_heads: need 1 <= m <= n");
  const std::size_t ramps = (std::size_t{1} << m) - 1;
  AffineLayer hidden(4 * ramps + 1, 1);
  Expr x = input_expr();
  Stage st = ramp_rows(hidden, x, m, ramp_eps(n));
  add_row(hidden, 4 * ramps, x);

  AffineLayer out(static_cast<std::size_t>(m) + 1, hidden.out_dim());
  for (int i = 1; i <= m; ++i) {
    Expr bit;
    for (std::size_t j = 1; j <= ramps; ++j)
      if ((j >> (m - i)) & 1) st.add_ramp(bit, j, Rational(1));
    add_row(out, static_cast<std::size_t>(i - 1), bit);
  }
  Expr rem;
  rem.terms.push_back({static_cast<std::uint32_t>(4 * ramps), Rational(BigInt(1) << m)});
  for (std::size_t j = 1; j <= ramps; ++j) st.add_ramp(rem, j, -Rational(static_cast<unsigned long>(j)));
  add_row(out, static_cast<std::size_t>(m), rem);

  std::vector<AffineLayer> layers;
  layers.push_back(std::move(hidden));
  layers.push_back(std::move(out));
  return Network(1, std::move(layers));
}

Network extract_stream(int n, int m, int L) { return stream(n, m, L, true); }
Network extract_stream_exclusive(int n, int m, int L) { return stream(n, m, L, false); }

namespace {

pwl::PwlFunc sawtooth_pwl(int i, bool halfline) {
  if (i < 1) throw InputError("sawtooth: need i >= 1");
  if (i > 30) throw InputError("sawtooth: i too large");
  const unsigned long teeth = 1ul << i;
  const Rational step = power(Rational(2), -i);
  pwl::PwlFunc f;
  for (unsigned long j = halfline ? 1 : 0; j <= teeth; ++j) {
    f.breakpoints.push_back(step * j);
    f.values.push_back(Rational(static_cast<long>(j & 1)));
  }
  if (halfline) {
    // continue the first rising piece leftwards and the last falling piece rightwards
    f.breakpoints.pop_back();
    f.values.pop_back();
    f.left_slope = Rational(BigInt(teeth));
    f.right_slope = -Rational(BigInt(teeth));
  }
  return f;
}

}  // namespace

Network sawtooth_net(int i) { return pwl::synth_shallow(sawtooth_pwl(i, false)); }
Network sawtooth_halfline_net(int i) { return pwl::synth_shallow(sawtooth_pwl(i, true)); }

Network delta_net() {
  pwl::PwlFunc h{{Rational(-1), Rational(0), Rational(1)}, {Rational(0), Rational(1), Rational(0)}, 0, 0};
  return pwl::synth_shallow(h);
}

}  // namespace relunet::bits
