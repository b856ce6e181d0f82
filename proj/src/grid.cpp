// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#include "relunet/grid.hpp"

namespace relunet::grid {

using net::AffineLayer;
using net::Network;

BigInt GridSpec::cells() const { return ipow(base, static_cast<unsigned long>(ell)); }

void GridSpec::validate() const {
  if (base < 2) throw InputError("grid: base must be >= 2");
  if (ell < 0) throw InputError("grid: level must be >= 0");
  if (dim < 1) throw InputError("grid: dimension must be >= 1");
  if (!(eps > 0) || !(eps < 1 / Rational(cells()))) throw InputError("grid: need 0 < eps < b^-ell");
}

BigInt flat_index(const GridSpec& spec, const GridIndex& i) {
  if (static_cast<long>(i.size()) != spec.dim) throw InputError("flat_index: index has wrong length");
  const BigInt n = spec.cells();
  BigInt acc = 0;
  for (std::size_t j = i.size(); j-- > 0;) {
    if (i[j] < 0 || BigInt(i[j]) >= n) throw InputError("flat_index: component out of range");
    acc = acc * n + i[j];
  }
  return acc;
}

Location locate(const GridSpec& spec, const std::vector<Rational>& x) {
  if (static_cast<long>(x.size()) != spec.dim) throw InputError("locate: point has wrong length");
  const BigInt n = spec.cells();
  const Rational side = 1 / Rational(n);
  Location loc;
  loc.good = true;
  for (const auto& xj : x) {
    if (xj < 0 || xj >= 1) throw InputError("locate: point outside [0,1)^d");
    BigInt ij = floor_of(xj * Rational(n));
    loc.index.push_back(to_long(ij));
    bool last = ij == n - 1;
    if (!last && xj >= side * Rational(ij + 1) - spec.eps) loc.good = false;
  }
  return loc;
}

pwl::PwlFunc index_staircase(long base, long m, const Rational& eps) {
  pwl::PwlFunc g;
  const BigInt steps = ipow(base, static_cast<unsigned long>(m));
  const Rational side = 1 / Rational(steps);
  for (BigInt j = 1; j < steps; ++j) {
    Rational at = side * Rational(j);
    g.breakpoints.push_back(at - eps);
    g.values.push_back(Rational(j - 1));
    g.breakpoints.push_back(at);
    g.values.push_back(Rational(j));
  }
  if (g.breakpoints.empty()) {
    g.breakpoints.push_back(Rational(0));
    g.values.push_back(Rational(0));
  }
  return g;
}

Network index_net_1d(const GridSpec& spec, long depth) {
  GridSpec s1 = spec;
  s1.dim = 1;
  s1.validate();
  if (depth < 1) throw InputError("index_net_1d: depth must be >= 1");
  if (spec.ell == 0) return net::affine(AffineLayer(1, 1));

  const long m = (spec.ell + depth - 1) / depth;
  std::vector<long> chunks(static_cast<std::size_t>(spec.ell / m), m);
  if (spec.ell % m != 0) chunks.push_back(spec.ell % m);

  // Per step: hidden [relu(p)] relu(t) staircase(t); then
  //   p <- b^c relu(p) + g_c(t),  t <- b^c relu(t) - g_c(t).
  std::vector<AffineLayer> layers;
  struct Expr {
    std::vector<net::Term> terms;
    Rational bias{0};
  };
  Expr p, t{{{0, Rational(1)}}, Rational(0)};
  bool have_p = false;
  std::size_t prev_dim = 1;
  auto put = [](AffineLayer& layer, std::size_t row, const Expr& e, const Rational& offset) {
    for (const auto& term : e.terms) layer.add(row, term.col, term.value);
    layer.bias[row] += e.bias + offset;
  };
  for (long c : chunks) {
    Network stair = pwl::synth_shallow(index_staircase(spec.base, c, spec.eps));
    auto stair_layers = std::move(stair).release_layers();
    const bool shallow = stair_layers.size() == 2;  // c >= 1 always gives a hidden layer
    if (!shallow) throw std::logic_error("index staircase should be depth 1");
    const AffineLayer& sh = stair_layers[0];
    const AffineLayer& so = stair_layers[1];

    const std::size_t p_row = 0;
    const std::size_t t_row = have_p ? 1 : 0;
    const std::size_t first = t_row + 1;
    AffineLayer layer(first + sh.out_dim(), prev_dim);
    if (have_p) put(layer, p_row, p, Rational(0));
    put(layer, t_row, t, Rational(0));
    for (std::size_t k = 0; k < sh.out_dim(); ++k) {
      // staircase neuron: relu(w t + beta)
      Rational w = sh.at(k, 0);
      Expr scaled;
      for (const auto& term : t.terms) scaled.terms.push_back({term.col, w * term.value});
      scaled.bias = w * t.bias;
      put(layer, first + k, scaled, sh.bias[k]);
    }
    const Rational scale(ipow(spec.base, static_cast<unsigned long>(c)));
    Expr np, nt;
    if (have_p) np.terms.push_back({static_cast<std::uint32_t>(p_row), scale});
    nt.terms.push_back({static_cast<std::uint32_t>(t_row), scale});
    for (const auto& e : so.rows[0]) {
      np.terms.push_back({static_cast<std::uint32_t>(first + e.col), so.weight(e)});
      nt.terms.push_back({static_cast<std::uint32_t>(first + e.col), -so.weight(e)});
    }
    np.bias = so.bias[0];
    nt.bias = -so.bias[0];
    prev_dim = layer.out_dim();
    layers.push_back(std::move(layer));
    p = std::move(np);
    t = std::move(nt);
    have_p = true;
  }
  AffineLayer out(1, prev_dim);
  put(out, 0, p, Rational(0));
  layers.push_back(std::move(out));
  return Network(1, std::move(layers));
}

Network index_net(const GridSpec& spec, long depth) {
  spec.validate();
  if (spec.dim == 1) return index_net_1d(spec, depth);
  const std::size_t d = static_cast<std::size_t>(spec.dim);
  if (spec.ell == 0) return net::affine(AffineLayer(1, d));
  std::vector<Network> parts(d, index_net_1d(spec, depth));
  Network q = net::parallel(std::move(parts));
  std::vector<std::vector<Rational>> w(1, std::vector<Rational>(d));
  Rational mult(1);
  const Rational n(spec.cells());
  for (std::size_t j = 0; j < d; ++j) {
    w[0][j] = mult;
    mult *= n;
  }
  return net::then_affine(std::move(q), w, {Rational(0)});
}

}  // namespace relunet::grid
