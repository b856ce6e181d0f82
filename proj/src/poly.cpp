// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#include "relunet/poly.hpp"

#include <algorithm>
#include <cmath>

#include "json_num.hpp"
#include "relunet/bits.hpp"
#include "relunet/pwl.hpp"

namespace relunet::poly {

using grid::GridIndex;
using grid::GridSpec;
using net::Network;

namespace {

long degree_of(const MultiIndex& g) {
  long s = 0;
  for (long v : g) s += v;
  return s;
}

GridIndex cell_of(const GridSpec& spec, const std::vector<Rational>& x) {
  const BigInt n = spec.cells();
  GridIndex idx;
  for (const auto& xj : x) {
    BigInt i = floor_of(xj * Rational(n));
    if (i >= n) i = n - 1;
    if (i < 0) i = 0;
    idx.push_back(to_long(i));
  }
  return idx;
}

}  // namespace

// ---- multi-indices and the piecewise polynomial --------------------------------

std::vector<MultiIndex> multi_indices(long d, long k) {
  if (d < 1 || k < 0) throw InputError("multi_indices: need d >= 1 and k >= 0");
  std::vector<MultiIndex> out;
  for (long total = 0; total <= k; ++total) {
    // compositions of `total` into d parts, lexicographically decreasing in gamma_1
    MultiIndex g(static_cast<std::size_t>(d), 0);
    std::vector<MultiIndex> level;
    auto rec = [&](auto&& self, std::size_t j, long left) -> void {
      if (j + 1 == g.size()) {
        g[j] = left;
        level.push_back(g);
        return;
      }
      for (long v = left; v >= 0; --v) {
        g[j] = v;
        self(self, j + 1, left - v);
      }
    };
    rec(rec, 0, total);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

void PiecewisePoly::validate() const {
  spec.validate();
  if (degree < 0) throw InputError("piecewise polynomial: degree must be >= 0");
  const BigInt n = spec.cells();
  for (const auto& [key, a] : coeffs) {
    const auto& [i, g] = key;
    if (static_cast<long>(i.size()) != spec.dim || static_cast<long>(g.size()) != spec.dim)
      throw InputError("piecewise polynomial: index of wrong dimension");
    for (long v : i)
      if (v < 0 || BigInt(v) >= n) throw InputError("piecewise polynomial: cell index out of range");
    for (long v : g)
      if (v < 0) throw InputError("piecewise polynomial: negative exponent");
    if (degree_of(g) > degree) throw InputError("piecewise polynomial: |gamma| exceeds the degree");
  }
}

std::vector<MultiIndex> PiecewisePoly::multi_indices() const { return poly::multi_indices(spec.dim, degree); }

std::vector<Rational> PiecewisePoly::gamma_coeffs(const MultiIndex& gamma) const {
  std::vector<Rational> a(static_cast<std::size_t>(to_long(ipow(spec.base, static_cast<unsigned long>(spec.ell * spec.dim)))),
                          Rational(0));
  for (const auto& [key, v] : coeffs)
    if (key.second == gamma) a[static_cast<std::size_t>(to_long(grid::flat_index(spec, key.first)))] = v;
  return a;
}

CoeffTable CoeffTable::zeros(const GridSpec& spec, long k) {
  CoeffTable t;
  t.spec = spec;
  t.degree = k;
  t.gammas = poly::multi_indices(spec.dim, k);
  const std::size_t n = static_cast<std::size_t>(to_long(ipow(spec.base, static_cast<unsigned long>(spec.ell * spec.dim))));
  t.values.assign(t.gammas.size(), std::vector<double>(n, 0.0));
  return t;
}

std::size_t CoeffTable::cells() const { return values.empty() ? 0 : values.front().size(); }

PiecewisePoly CoeffTable::to_pwpoly() const {
  PiecewisePoly f;
  f.spec = spec;
  f.degree = degree;
  const long per_axis = to_long(spec.cells());
  for (std::size_t g = 0; g < gammas.size(); ++g)
    for (std::size_t c = 0; c < values[g].size(); ++c) {
      if (values[g][c] == 0) continue;
      GridIndex i(static_cast<std::size_t>(spec.dim));
      long rest = static_cast<long>(c);
      for (auto& ij : i) {
        ij = rest % per_axis;
        rest /= per_axis;
      }
      f.coeffs[{i, gammas[g]}] = from_double(values[g][c]);
    }
  return f;
}

double eval(const CoeffTable& f, const std::vector<double>& x) {
  if (static_cast<long>(x.size()) != f.spec.dim) throw InputError("eval: dimension mismatch");
  const long per_axis = to_long(f.spec.cells());
  const double n = static_cast<double>(per_axis);
  std::size_t flat = 0, stride = 1;
  std::vector<double> y;
  for (double xj : x) {
    long i = std::clamp(static_cast<long>(std::floor(xj * n)), 0L, per_axis - 1);
    flat += static_cast<std::size_t>(i) * stride;
    stride *= static_cast<std::size_t>(per_axis);
    y.push_back(xj * n - static_cast<double>(i));
  }
  double s = 0;
  for (std::size_t g = 0; g < f.gammas.size(); ++g) {
    double term = f.values[g][flat];
    if (term == 0) continue;
    for (std::size_t j = 0; j < y.size(); ++j) term *= std::pow(y[j], static_cast<double>(f.gammas[g][j]));
    s += term;
  }
  return s;
}

bool PolyApproxParams::sparse(const GridSpec& spec) const {
  if (std::isinf(q)) return false;
  return to_double(delta) * q <= static_cast<double>(spec.dim * spec.ell);
}

Rational basis_eval(const GridSpec& spec, const GridIndex& i, const MultiIndex& gamma, const std::vector<Rational>& x) {
  if (x.size() != i.size() || x.size() != gamma.size()) throw InputError("basis_eval: dimension mismatch");
  const Rational n(spec.cells());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const Rational lo = Rational(i[j]) / n;
    const Rational hi = Rational(i[j] + 1) / n;
    const bool last = Rational(i[j] + 1) == n;
    if (x[j] < lo || x[j] > hi || (x[j] == hi && !last)) return Rational(0);
  }
  Rational v(1);
  for (std::size_t j = 0; j < x.size(); ++j) v *= power(n * x[j] - i[j], gamma[j]);
  return v;
}

Rational eval(const PiecewisePoly& f, const std::vector<Rational>& x) {
  if (static_cast<long>(x.size()) != f.spec.dim) throw InputError("eval: dimension mismatch");
  const GridIndex cell = cell_of(f.spec, x);
  const Rational n(f.spec.cells());
  Rational s(0);
  for (auto it = f.coeffs.lower_bound({cell, MultiIndex{}}); it != f.coeffs.end() && it->first.first == cell; ++it) {
    Rational term = it->second;
    for (std::size_t j = 0; j < x.size(); ++j) term *= power(n * x[j] - cell[j], it->first.second[j]);
    s += term;
  }
  return s;
}

double eval(const PiecewisePoly& f, const std::vector<double>& x) {
  if (static_cast<long>(x.size()) != f.spec.dim) throw InputError("eval: dimension mismatch");
  const double n = to_double(Rational(f.spec.cells()));
  const long top = to_long(f.spec.cells()) - 1;
  GridIndex cell;
  std::vector<double> y;
  for (double xj : x) {
    long i = std::clamp(static_cast<long>(std::floor(xj * n)), 0L, top);
    cell.push_back(i);
    y.push_back(xj * n - static_cast<double>(i));
  }
  double s = 0;
  for (auto it = f.coeffs.lower_bound({cell, MultiIndex{}}); it != f.coeffs.end() && it->first.first == cell; ++it) {
    double term = to_double(it->second);
    for (std::size_t j = 0; j < y.size(); ++j) term *= std::pow(y[j], static_cast<double>(it->first.second[j]));
    s += term;
  }
  return s;
}

// ---- square, product and monomial networks -------------------------------------

namespace {

// T_i(|x|) on [-1,1] as a one-hidden-layer network of width 2^{i+1}.
Network sawtooth_abs(long i) {
  const long n = 1L << i;
  pwl::PwlFunc f;
  for (long j = -n; j <= n; ++j) {
    f.breakpoints.push_back(make_rational(j, n));
    f.values.push_back(Rational(std::labs(j) % 2));
  }
  f.left_slope = Rational(n);
  f.right_slope = Rational(-n);
  return pwl::synth_shallow(pwl::simplify(f));
}

Network abs_net() {
  net::AffineLayer h(2, 1);
  h.add(0, 0, Rational(1));
  h.add(1, 0, Rational(-1));
  net::AffineLayer out(1, 2);
  out.add(0, 0, Rational(1));
  out.add(0, 1, Rational(1));
  std::vector<net::AffineLayer> layers;
  layers.push_back(std::move(h));
  layers.push_back(std::move(out));
  return Network(1, std::move(layers));
}

// (T_1, ..., T_k, carry) -> (T_k, carry - sum_i 4^{-(offset+i)} T_i)
std::vector<std::vector<Rational>> fold_weights(long k, long offset) {
  std::vector<std::vector<Rational>> w(2, std::vector<Rational>(static_cast<std::size_t>(k + 1), Rational(0)));
  w[0][static_cast<std::size_t>(k - 1)] = 1;
  w[1][static_cast<std::size_t>(k)] = 1;
  for (long i = 1; i <= k; ++i) w[1][static_cast<std::size_t>(i - 1)] = -power(Rational(4), -(offset + i));
  return w;
}

}  // namespace

Network square_net(long k, long L) {
  if (k < 4) throw InputError("square_net: k must be >= 4");
  if (L < 1) throw InputError("square_net: L must be >= 1");
  std::vector<Network> first;
  for (long i = 1; i <= k; ++i) first.push_back(sawtooth_abs(i));
  first.push_back(abs_net());
  std::vector<bool> nonneg(first.size(), true);
  std::vector<Network> chain;
  chain.push_back(net::then_affine(net::concat(std::move(first), nonneg), fold_weights(k, 0), {0, 0}));
  for (long l = 2; l <= L; ++l) {
    std::vector<Network> tooth;
    for (long i = 1; i <= k; ++i) tooth.push_back(bits::sawtooth_halfline_net(static_cast<int>(i)));
    Network teeth = net::concat(std::move(tooth), std::vector<bool>(static_cast<std::size_t>(k), true));
    Network stage = net::parallel({std::move(teeth), net::identity(1, 1, true)}, {true, true});
    chain.push_back(net::then_affine(std::move(stage), fold_weights(k, (l - 1) * k), {0, 0}));
  }
  chain.push_back(net::select(2, {1}));
  return net::compose_all(std::move(chain));
}

Network product_net(long k, long L) {
  Network g = square_net(k, L);
  const Rational half(1, 2);
  std::vector<Network> parts;
  parts.push_back(net::compose(net::affine({{half, half}}, {Rational(0)}), g));
  parts.push_back(net::compose(net::select(2, {0}), g));
  parts.push_back(net::compose(net::select(2, {1}), std::move(g)));
  return net::then_affine(net::concat(std::move(parts), {true, true, true}), {{2, -half, -half}}, {0});
}

Network monomial_net(const MultiIndex& gamma, long W0, long L0) {
  if (gamma.empty()) throw InputError("monomial_net: empty multi-index");
  if (W0 < 1 || L0 < 1) throw InputError("monomial_net: W0 and L0 must be >= 1");
  const std::size_t d = gamma.size();
  std::vector<std::size_t> y_idx(d);
  for (std::size_t j = 0; j < d; ++j) y_idx[j] = j;
  std::vector<Network> chain;
  const Network prod = product_net(W0 + 3, L0);
  for (std::size_t j = 0; j < d; ++j) {
    if (gamma[j] < 0) throw InputError("monomial_net: negative exponent");
    for (long c = 0; c < gamma[j]; ++c) {
      Network keep = net::compose(net::select(d + 1, y_idx), net::identity(d, static_cast<std::size_t>(L0)));
      Network mult = net::compose(net::select(d + 1, {j, d}), prod);
      chain.push_back(net::concat({std::move(keep), std::move(mult)}));
    }
  }
  chain.push_back(net::select(d + 1, {d}));
  return net::compose_all(std::move(chain));
}

// ---- coefficient quantization ---------------------------------------------------

BigInt quant_levels(long base, const Rational& delta) {
  if (delta < 0) throw InputError("quantization: delta must be >= 0");
  if (delta == 0) return BigInt(1);
  return ceil_root_power(base, delta.get_num(), delta.get_den());
}

PiecewisePoly quantize_coeffs(const PiecewisePoly& f, const Rational& delta) {
  const Rational Q(quant_levels(f.spec.base, delta));
  PiecewisePoly out = f;
  for (auto& [key, a] : out.coeffs) {
    Rational mag(floor_of(Q * abs(a)));
    a = (a < 0 ? -mag : mag) / Q;
  }
  return out;
}

long lift_norm_bound(long base, const Rational& delta, double q, long d, long ell) {
  const double Q = to_double(Rational(quant_levels(base, delta)));
  const double N = std::pow(static_cast<double>(base), static_cast<double>(d * ell));
  double support, expo;
  if (std::isinf(q)) {
    support = N;
    expo = 1;
  } else {
    support = std::min(std::pow(Q, q), N);
    expo = 1 - 1 / q;
  }
  const long double bound = static_cast<long double>(Q) * std::pow(static_cast<long double>(support), expo);
  if (!(bound < 1e15L)) throw InputError("quantization: coefficient lift too large to encode");
  // round up at the last few ulps so a bound that is an integer in exact arithmetic is kept
  return std::max(1L, static_cast<long>(std::floor(bound * (1 + 1e-12L))));
}

double lq_norm(const std::vector<double>& a, double q) {
  double s = 0;
  if (std::isinf(q)) {
    for (double v : a) s = std::max(s, std::abs(v));
    return s;
  }
  for (double v : a) s += std::pow(std::abs(v), q);
  return std::pow(s, 1 / q);
}

double lq_norm(const std::vector<Rational>& a, double q) {
  double s = 0;
  if (std::isinf(q)) {
    for (const auto& v : a) s = std::max(s, std::abs(to_double(v)));
    return s;
  }
  for (const auto& v : a) s += std::pow(std::abs(to_double(v)), q);
  return std::pow(s, 1 / q);
}

// ---- the approximation network ----------------------------------------------------

Network local_coordinates_net(const GridSpec& spec, long L0) {
  spec.validate();
  if (L0 < 1) throw InputError("local_coordinates_net: L0 must be >= 1");
  const std::size_t d = static_cast<std::size_t>(spec.dim);
  std::vector<Network> q1(d, grid::index_net_1d(spec, L0));
  std::vector<Network> parts;
  parts.push_back(net::parallel(std::move(q1), std::vector<bool>(d, true)));
  parts.push_back(net::identity(d, static_cast<std::size_t>(L0), true));
  Network both = net::concat(std::move(parts), {true, true});
  // (q_1(x_1..d), x_1..d) -> (b^ell x_j - q_j, sum_j b^{ell(j-1)} q_j)
  const Rational n(spec.cells());
  std::vector<std::vector<Rational>> w(d + 1, std::vector<Rational>(2 * d, Rational(0)));
  Rational mult(1);
  for (std::size_t j = 0; j < d; ++j) {
    w[j][j] = -1;
    w[j][d + j] = n;
    w[d][j] = mult;
    mult *= n;
  }
  return net::then_affine(std::move(both), w, std::vector<Rational>(d + 1, Rational(0)));
}

namespace {

Rational exact(const Rational& v) { return v; }
Rational exact(double v) { return from_double(v); }

// Upper bound on ||a||_q as a rational: exact for q = 1 and q = inf, otherwise the
// double value nudged up by 1e-9 relative. 1 for the zero vector.
template <class Coeff>
Rational norm_upper(const std::vector<Coeff>& a, double q) {
  Rational acc(0);
  if (std::isinf(q) || q == 1) {
    for (const auto& v : a) {
      if (v == 0) continue;
      Rational m = abs(exact(v));
      if (std::isinf(q))
        acc = std::max(acc, m);
      else
        acc += m;
    }
    return acc == 0 ? Rational(1) : acc;
  }
  const double norm = lq_norm(a, q);
  return norm == 0 ? Rational(1) : from_double(norm * (1 + 1e-9));
}

template <class Coeff>
GammaBranch branch_impl(const GridSpec& spec, const MultiIndex& gamma, const std::vector<Coeff>& a,
                        const PolyApproxParams& params) {
  const std::size_t d = static_cast<std::size_t>(spec.dim);
  if (gamma.size() != d) throw InputError("gamma_branch: multi-index of wrong dimension");

  struct {
    Rational scale;
    BigInt levels;
    std::vector<long> lift;
    long M = 0;
  } br;
  // quantize relative to the branch's own norm, so fine levels keep their precision
  br.scale = norm_upper(a, params.q);
  br.levels = quant_levels(spec.base, params.delta);
  const Rational Q(br.levels);
  codec::IntVector u;
  u.x.assign(a.size(), 0);
  long ell1 = 0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (a[n] == 0) continue;
    Rational scaled = exact(a[n]) / br.scale;
    long mag = to_long(floor_of(Q * abs(scaled)));
    u.x[n] = scaled < 0 ? -mag : mag;
    ell1 += mag;
  }
  br.lift = u.x;
  br.M = lift_norm_bound(spec.base, params.delta, params.q, spec.dim, spec.ell);
  if (ell1 > br.M) throw std::logic_error("gamma_branch: integer lift exceeds its l1 bound");

  Network phi = codec::rep_net(u, br.M, params.S, params.T);
  // (y, ind) -> (y, u_{ind+1} / Q)
  std::vector<std::size_t> y_idx(d);
  for (std::size_t j = 0; j < d; ++j) y_idx[j] = j;
  std::vector<std::vector<Rational>> shift(1, std::vector<Rational>(d + 1, Rational(0)));
  shift[0][d] = 1;
  Network lookup = net::compose(net::affine(shift, {Rational(1)}), std::move(phi));
  lookup = net::then_affine(std::move(lookup), {{1 / Q}}, {0});
  Network keep = net::compose(net::select(d + 1, y_idx), net::identity(d, std::max<std::size_t>(1, lookup.depth())));
  Network h = net::concat({std::move(keep), std::move(lookup)});
  Network P = monomial_net(gamma, params.W0, params.L0);
  Network out = net::then_affine(net::compose(std::move(h), std::move(P)), {{br.scale}}, {0});
  return GammaBranch{std::move(out), br.scale, br.levels, std::move(br.lift), br.M};
}

void check_params(const PolyApproxParams& params) {
  if (params.q > params.p) throw InputError("pwpoly_net: need q <= p");
  if (params.q < 1 || params.p < 1) throw InputError("pwpoly_net: p and q must be >= 1");
}

Network sum_branches(std::vector<Network> branches, const GridSpec& spec, long L0) {
  if (branches.empty()) return net::affine(net::AffineLayer(1, static_cast<std::size_t>(spec.dim)));
  const std::size_t count = branches.size();
  Network sum = net::then_affine(net::concat(std::move(branches)),
                                 {std::vector<Rational>(count, Rational(1))}, {Rational(0)});
  return net::compose(local_coordinates_net(spec, L0), std::move(sum));
}

}  // namespace

GammaBranch gamma_branch(const PiecewisePoly& f, const MultiIndex& gamma, const PolyApproxParams& params) {
  return branch_impl(f.spec, gamma, f.gamma_coeffs(gamma), params);
}

GammaBranch gamma_branch(const GridSpec& spec, const MultiIndex& gamma, const std::vector<double>& a,
                         const PolyApproxParams& params) {
  if (static_cast<long>(a.size()) != to_long(ipow(spec.base, static_cast<unsigned long>(spec.ell * spec.dim))))
    throw InputError("gamma_branch: coefficient vector length must be b^(d ell)");
  return branch_impl(spec, gamma, a, params);
}

Network pwpoly_net(const CoeffTable& f, const PolyApproxParams& params, const Rational& eps) {
  GridSpec spec = f.spec;
  spec.eps = eps;
  if (!(eps > 0) || !(eps < 1 / Rational(spec.cells()))) throw InputError("pwpoly_net: need 0 < eps < b^-ell");
  check_params(params);
  spec.validate();
  if (f.values.size() != f.gammas.size()) throw InputError("pwpoly_net: table shape mismatch");
  std::vector<Network> branches;
  for (std::size_t g = 0; g < f.gammas.size(); ++g) {
    if (degree_of(f.gammas[g]) > f.degree) throw InputError("pwpoly_net: multi-index above the degree");
    const auto& a = f.values[g];
    if (std::all_of(a.begin(), a.end(), [](double v) { return v == 0; })) continue;
    branches.push_back(gamma_branch(spec, f.gammas[g], a, params).net);
  }
  return sum_branches(std::move(branches), spec, params.L0);
}

Network pwpoly_net(const PiecewisePoly& f, const PolyApproxParams& params, const Rational& eps) {
  GridSpec spec = f.spec;
  spec.eps = eps;
  if (!(eps > 0) || !(eps < 1 / Rational(spec.cells()))) throw InputError("pwpoly_net: need 0 < eps < b^-ell");
  check_params(params);
  PiecewisePoly g = f;
  g.spec = spec;
  g.validate();
  std::vector<Network> branches;
  for (const auto& gamma : g.multi_indices()) {
    bool any = false;
    for (const auto& [key, a] : g.coeffs) any = any || (key.second == gamma && a != 0);
    if (!any) continue;
    branches.push_back(gamma_branch(g, gamma, params).net);
  }
  return sum_branches(std::move(branches), spec, params.L0);
}

// ---- JSON ---------------------------------------------------------------------------

std::string to_json(const PiecewisePoly& f) {
  detail::json doc;
  doc["b"] = f.spec.base;
  doc["ell"] = f.spec.ell;
  doc["d"] = f.spec.dim;
  doc["k"] = f.degree;
  if (f.spec.eps > 0) doc["eps"] = to_string(f.spec.eps);
  detail::json cs = detail::json::array();
  for (const auto& [key, a] : f.coeffs)
    cs.push_back({{"i", key.first}, {"gamma", key.second}, {"a", to_string(a)}});
  doc["coeffs"] = std::move(cs);
  return doc.dump();
}

PiecewisePoly pwpoly_from_json(const std::string& text) {
  try {
    auto doc = detail::json::parse(text);
    PiecewisePoly f;
    f.spec.base = doc.at("b").get<long>();
    f.spec.ell = doc.at("ell").get<long>();
    f.spec.dim = doc.at("d").get<long>();
    f.degree = doc.at("k").get<long>();
    if (doc.contains("eps"))
      f.spec.eps = detail::decode_num(doc["eps"], net::Mode::Rational);
    else
      f.spec.eps = 1 / (4 * Rational(ipow(f.spec.base, static_cast<unsigned long>(std::max(0L, f.spec.ell)))));
    for (const auto& c : doc.at("coeffs")) {
      const auto& a = c.at("a");
      Rational v = a.is_number_float() ? from_double(a.get<double>()) : detail::decode_num(a, net::Mode::Rational);
      f.coeffs[{c.at("i").get<GridIndex>(), c.at("gamma").get<MultiIndex>()}] += v;
    }
    f.validate();
    return f;
  } catch (const detail::json::exception& e) {
    throw InputError(std::string("malformed piecewise polynomial document: ") + e.what());
  }
}

}  // namespace relunet::poly
