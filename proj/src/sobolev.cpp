// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#include "relunet/sobolev.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json_num.hpp"

namespace relunet::sobolev {

using grid::GridSpec;
using net::Network;
using poly::CoeffTable;
using poly::MultiIndex;
using poly::PiecewisePoly;

namespace {

constexpr double kPi = 3.14159265358979323846;

long floor_long(const Rational& r) { return to_long(floor_of(r)); }
long ceil_long(const Rational& r) { return to_long(ceil_of(r)); }

// ceil(b^e) for rational e >= 0
long ceil_pow(long b, const Rational& e) {
  if (e < 0) throw std::logic_error("ceil_pow: negative exponent");
  return to_long(ceil_root_power(b, e.get_num(), e.get_den()));
}

long ipow_long(long b, long e) { return to_long(ipow(b, static_cast<unsigned long>(e))); }

// largest a with b^a <= m
long floor_log(long b, long m) {
  long a = 0;
  for (long v = b; v <= m; v *= b) ++a;
  return a;
}

long degree_of(const MultiIndex& g) { return std::accumulate(g.begin(), g.end(), 0L); }

double binom(long n, long k) {
  double r = 1;
  for (long i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// all offset vectors r in {0..b-1}^d, axis 0 fastest (flat-index order)
std::vector<std::vector<long>> offsets(long b, long d) {
  std::vector<std::vector<long>> out;
  const long count = ipow_long(b, d);
  for (long c = 0; c < count; ++c) {
    std::vector<long> r(static_cast<std::size_t>(d));
    long rest = c;
    for (auto& v : r) {
      v = rest % b;
      rest /= b;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Coarse basis y_c^gamma with y_c = (r + y) / b written in the fine coordinate y:
// weight[g'][g] of y^{gamma'} in the expansion of y_c^{gamma}.
std::vector<std::vector<double>> transfer(const std::vector<MultiIndex>& gammas, long b, const std::vector<long>& r) {
  const std::size_t n = gammas.size();
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  for (std::size_t g = 0; g < n; ++g)
    for (std::size_t h = 0; h < n; ++h) {
      double v = 1;
      for (std::size_t j = 0; j < r.size() && v != 0; ++j) {
        const long top = gammas[g][j], low = gammas[h][j];
        if (low > top) {
          v = 0;
          break;
        }
        v *= binom(top, low) * std::pow(static_cast<double>(r[j]), static_cast<double>(top - low)) /
             std::pow(static_cast<double>(b), static_cast<double>(top));
      }
      w[h][g] = v;
    }
  return w;
}

CoeffTable refine_table(const CoeffTable& coarse) {
  GridSpec fine_spec = coarse.spec;
  fine_spec.ell += 1;
  CoeffTable fine = CoeffTable::zeros(fine_spec, coarse.degree);
  const long b = coarse.spec.base, d = coarse.spec.dim;
  const long per_coarse = to_long(coarse.spec.cells());
  const long per_fine = per_coarse * b;
  const auto rs = offsets(b, d);
  std::vector<std::vector<std::vector<double>>> maps;
  for (const auto& r : rs) maps.push_back(transfer(coarse.gammas, b, r));
  const std::size_t ng = coarse.gammas.size();
  const std::size_t ncoarse = coarse.cells();
  std::vector<long> ic(static_cast<std::size_t>(d));
  for (std::size_t c = 0; c < ncoarse; ++c) {
    long rest = static_cast<long>(c);
    for (auto& v : ic) {
      v = rest % per_coarse;
      rest /= per_coarse;
    }
    for (std::size_t ri = 0; ri < rs.size(); ++ri) {
      std::size_t flat = 0, stride = 1;
      for (std::size_t j = 0; j < ic.size(); ++j) {
        flat += static_cast<std::size_t>(ic[j] * b + rs[ri][j]) * stride;
        stride *= static_cast<std::size_t>(per_fine);
      }
      for (std::size_t h = 0; h < ng; ++h) {
        double v = 0;
        for (std::size_t g = 0; g < ng; ++g) v += maps[ri][h][g] * coarse.values[g][c];
        fine.values[h][flat] = v;
      }
    }
  }
  return fine;
}

// Tensor quadrature on [0,1]^d with the per-cell projection matrix G^{-1} Phi.
struct CellProjector {
  std::vector<std::vector<double>> nodes;  // local coordinates
  Eigen::MatrixXd apply;  // gammas x nodes
};

CellProjector cell_projector(long d, long k, const std::vector<MultiIndex>& gammas) {
  const Quadrature rule = gauss_legendre(static_cast<int>(2 * (k + 1)));
  const std::size_t per_axis = rule.nodes.size();
  std::size_t total = 1;
  for (long j = 0; j < d; ++j) total *= per_axis;
  CellProjector cp;
  std::vector<double> weights;
  for (std::size_t t = 0; t < total; ++t) {
    std::vector<double> y;
    double w = 1;
    std::size_t rest = t;
    for (long j = 0; j < d; ++j) {
      y.push_back(rule.nodes[rest % per_axis]);
      w *= rule.weights[rest % per_axis];
      rest /= per_axis;
    }
    cp.nodes.push_back(std::move(y));
    weights.push_back(w);
  }
  const auto n = static_cast<Eigen::Index>(gammas.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index c = 0; c < n; ++c) {
      double v = 1;
      for (long j = 0; j < d; ++j)
        v /= static_cast<double>(gammas[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] +
                                 gammas[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] + 1);
      gram(a, c) = v;
    }
  Eigen::MatrixXd phi(n, static_cast<Eigen::Index>(total));
  for (Eigen::Index a = 0; a < n; ++a)
    for (std::size_t t = 0; t < total; ++t) {
      double v = weights[t];
      for (long j = 0; j < d; ++j)
        v *= std::pow(cp.nodes[t][static_cast<std::size_t>(j)],
                      static_cast<double>(gammas[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)]));
      phi(a, static_cast<Eigen::Index>(t)) = v;
    }
  cp.apply = gram.ldlt().solve(phi);
  return cp;
}

CoeffTable project_table(const TargetFunction& f, const GridSpec& spec, long k) {
  if (k < 0) throw InputError("project: k must be >= 0");
  if (f.dim != spec.dim) throw InputError("project: dimension mismatch");
  CoeffTable t = CoeffTable::zeros(spec, k);
  const CellProjector cp = cell_projector(spec.dim, k, t.gammas);
  const long per_axis = to_long(spec.cells());
  const double n = static_cast<double>(per_axis);
  const std::size_t cells = t.cells();
  const auto nodes = static_cast<Eigen::Index>(cp.nodes.size());
  const std::size_t d = static_cast<std::size_t>(spec.dim);
  Eigen::VectorXd fv(nodes);
  std::vector<double> x(d);
  std::vector<long> idx(d);
  for (std::size_t c = 0; c < cells; ++c) {
    long rest = static_cast<long>(c);
    for (auto& v : idx) {
      v = rest % per_axis;
      rest /= per_axis;
    }
    for (Eigen::Index q = 0; q < nodes; ++q) {
      for (std::size_t j = 0; j < d; ++j)
        x[j] = (static_cast<double>(idx[j]) + cp.nodes[static_cast<std::size_t>(q)][j]) / n;
      fv(q) = f.eval(x);
    }
    Eigen::VectorXd a = cp.apply * fv;
    for (std::size_t g = 0; g < t.gammas.size(); ++g) t.values[g][c] = a(static_cast<Eigen::Index>(g));
  }
  return t;
}

double coeff_norm_table(const CoeffTable& t, Exponent q) {
  std::vector<double> all;
  for (const auto& v : t.values) all.insert(all.end(), v.begin(), v.end());
  return poly::lq_norm(all, q.value());
}

// ---- presets ------------------------------------------------------------------------

double cubic_bspline(double t) {
  // cardinal cubic B-spline on [0,4]
  if (t <= 0 || t >= 4) return 0;
  if (t < 1) return t * t * t / 6;
  if (t < 2) return (-3 * t * t * t + 12 * t * t - 12 * t + 4) / 6;
  if (t < 3) return (3 * t * t * t - 24 * t * t + 60 * t - 44) / 6;
  const double u = 4 - t;
  return u * u * u / 6;
}

std::function<double(const std::vector<double>&)> preset_eval(const std::string& id) {
  if (id == "sin")
    return [](const std::vector<double>& x) {
      double v = 1;
      for (double xj : x) v *= std::sin(2 * kPi * xj);
      return v;
    };
  if (id == "gaussian-bump")
    return [](const std::vector<double>& x) {
      double r2 = 0;
      for (double xj : x) r2 += (xj - 0.5) * (xj - 0.5);
      return std::exp(-r2 / (2 * 0.15 * 0.15));
    };
  if (id == "abs-power")
    return [](const std::vector<double>& x) {
      double r2 = 0;
      for (double xj : x) r2 += (xj - 0.5) * (xj - 0.5);
      return std::pow(r2, 0.25);
    };
  if (id == "bspline")
    return [](const std::vector<double>& x) {
      double v = 1;
      for (double xj : x) v *= cubic_bspline(4 * xj);
      return v;
    };
  throw InputError("unknown target preset '" + id + "' (expected sin, gaussian-bump, abs-power, bspline)");
}

// |x - 1/2|^{1/2} on [0,1] with s = 1: both parts in closed form for q < 2.
bool abs_power_norm(long d, const Rational& s, Exponent q, double* out) {
  if (d != 1 || s != 1 || q.is_inf()) return false;
  const double qv = q.value();
  if (qv >= 2) return false;
  const double lq = 2 * std::pow(0.5, qv / 2 + 1) / (qv / 2 + 1);
  const double semi = 2 * std::pow(0.5, qv) * std::pow(0.5, 1 - qv / 2) / (1 - qv / 2);
  *out = std::pow(lq + semi, 1 / qv);
  return true;
}

Exponent exponent_from_json(const detail::json& v) {
  if (v.is_string()) return Exponent::parse(v.get<std::string>());
  if (v.is_number_integer()) return Exponent::of(v.get<long>());
  if (v.is_number()) return Exponent::parse(std::to_string(v.get<double>()));
  throw InputError("exponent must be a number or \"inf\"");
}

}  // namespace

// ---- exponents and targets ----------------------------------------------------------

Exponent Exponent::parse(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "Inf") return infinity();
  Rational v = parse_rational(text);
  if (v < 1) throw InputError("norm exponent must be >= 1, got '" + text + "'");
  return {1 / v};
}

double Exponent::value() const {
  return is_inf() ? std::numeric_limits<double>::infinity() : 1 / to_double(inv);
}

std::string Exponent::str() const {
  if (is_inf()) return "inf";
  Rational v = 1 / inv;
  return v.get_den() == 1 ? v.get_num().get_str() : to_string(v);
}

TargetFunction make_target(const std::string& preset, long d, const Rational& s, Exponent q, double scale) {
  if (d < 1) throw InputError("target: d must be >= 1");
  if (!(s > 0)) throw InputError("target: s must be > 0");
  if (!(scale > 0)) throw InputError("target: scale must be > 0");
  TargetFunction f;
  f.name = preset;
  f.dim = d;
  f.s = s;
  f.q = q;
  auto raw = preset_eval(preset);
  f.eval = scale == 1 ? raw : [raw, scale](const std::vector<double>& x) { return raw(x) / scale; };
  double analytic = 0;
  if (preset == "abs-power" && abs_power_norm(d, s, q, &analytic))
    f.declared_norm = analytic / scale;
  else if (s.get_den() == 1)
    f.declared_norm = sobolev_norm_estimate(f);
  return f;
}

TargetFunction target_from_json(const std::string& text, Exponent* p_out) {
  try {
    auto doc = detail::json::parse(text);
    const std::string expr = doc.value("expr", doc.value("name", std::string("sin")));
    const long d = doc.value("d", 1L);
    const Rational s = detail::decode_num(doc.at("s"), net::Mode::Rational);
    const Exponent q = doc.contains("q") ? exponent_from_json(doc["q"]) : Exponent::infinity();
    if (p_out) *p_out = doc.contains("p") ? exponent_from_json(doc["p"]) : q;
    double scale = doc.value("scale", 1.0);
    if (doc.value("normalize", false)) scale = make_target(expr, d, s, q).declared_norm;
    TargetFunction f = make_target(expr, d, s, q, scale);
    if (doc.contains("name")) f.name = doc["name"].get<std::string>();
    return f;
  } catch (const detail::json::exception& e) {
    throw InputError(std::string("malformed target document: ") + e.what());
  }
}

// ---- quadrature and projection ------------------------------------------------------

Quadrature gauss_legendre(int n) {
  if (n < 1) throw InputError("gauss_legendre: n must be >= 1");
  // nonnegative zeros of P_n on [-1,1], mirrored and mapped to [0,1]
  const auto zeros = boost::math::legendre_p_zeros<double>(n);
  std::vector<double> pts;
  for (double z : zeros) {
    pts.push_back(z);
    if (z != 0) pts.push_back(-z);
  }
  std::sort(pts.begin(), pts.end());
  Quadrature q;
  for (double z : pts) {
    const double dp = boost::math::legendre_p_prime(n, z);
    q.nodes.push_back((z + 1) / 2);
    q.weights.push_back(1 / ((1 - z * z) * dp * dp));  // 2/((1-z^2)P'^2), halved for [0,1]
  }
  return q;
}

PiecewisePoly project(const TargetFunction& f, const GridSpec& spec, long k) {
  return project_table(f, spec, k).to_pwpoly();
}

PiecewisePoly refine(const PiecewisePoly& f, long levels) {
  if (levels < 0) throw InputError("refine: levels must be >= 0");
  PiecewisePoly cur = f;
  const long b = f.spec.base, d = f.spec.dim;
  const auto rs = offsets(b, d);
  for (long step = 0; step < levels; ++step) {
    PiecewisePoly next;
    next.spec = cur.spec;
    next.spec.ell += 1;
    next.spec.eps = cur.spec.eps / b;
    next.degree = cur.degree;
    for (const auto& [key, a] : cur.coeffs) {
      const auto& [cell, gamma] = key;
      for (const auto& r : rs) {
        grid::GridIndex child(cell.size());
        for (std::size_t j = 0; j < cell.size(); ++j) child[j] = cell[j] * b + r[static_cast<std::size_t>(j)];
        // prod_j ((r_j + y_j)/b)^gamma_j expanded in y
        std::vector<std::pair<MultiIndex, Rational>> terms{{MultiIndex(cell.size(), 0), a}};
        for (std::size_t j = 0; j < cell.size(); ++j) {
          std::vector<std::pair<MultiIndex, Rational>> grown;
          for (const auto& [g, v] : terms)
            for (long t = 0; t <= gamma[j]; ++t) {
              MultiIndex h = g;
              h[j] = t;
              Rational c = v * Rational(BigInt(static_cast<unsigned long>(binom(gamma[j], t)))) *
                           power(Rational(r[j]), gamma[j] - t) / power(Rational(b), gamma[j]);
              grown.emplace_back(std::move(h), std::move(c));
            }
          terms = std::move(grown);
        }
        for (auto& [g, v] : terms)
          if (v != 0) next.coeffs[{child, g}] += v;
      }
    }
    for (auto it = next.coeffs.begin(); it != next.coeffs.end();) it = it->second == 0 ? next.coeffs.erase(it) : ++it;
    cur = std::move(next);
  }
  return cur;
}

PiecewisePoly subtract(const PiecewisePoly& f, const PiecewisePoly& g) {
  if (f.spec.base != g.spec.base || f.spec.ell != g.spec.ell || f.spec.dim != g.spec.dim)
    throw InputError("subtract: grids differ");
  PiecewisePoly out = f;
  out.degree = std::max(f.degree, g.degree);
  for (const auto& [key, a] : g.coeffs) out.coeffs[key] -= a;
  for (auto it = out.coeffs.begin(); it != out.coeffs.end();) it = it->second == 0 ? out.coeffs.erase(it) : ++it;
  return out;
}

std::vector<CoeffTable> multilevel_tables(const TargetFunction& f, long k, long ell_star, long base) {
  if (ell_star < 0) throw InputError("multilevel_decompose: ell* must be >= 0");
  GridSpec spec{base, 0, f.dim, Rational(0)};
  std::vector<CoeffTable> out;
  CoeffTable prev = project_table(f, spec, k);
  out.push_back(prev);
  for (long ell = 1; ell <= ell_star; ++ell) {
    spec.ell = ell;
    CoeffTable cur = project_table(f, spec, k);
    CoeffTable diff = refine_table(prev);
    for (std::size_t g = 0; g < diff.values.size(); ++g)
      for (std::size_t c = 0; c < diff.values[g].size(); ++c) diff.values[g][c] = cur.values[g][c] - diff.values[g][c];
    out.push_back(std::move(diff));
    prev = std::move(cur);
  }
  return out;
}

std::vector<PiecewisePoly> multilevel_decompose(const TargetFunction& f, long k, long ell_star, long base) {
  std::vector<PiecewisePoly> out;
  for (const auto& t : multilevel_tables(f, k, ell_star, base)) out.push_back(t.to_pwpoly());
  return out;
}

double coeff_norm(const PiecewisePoly& f, Exponent q) {
  std::vector<Rational> all;
  for (const auto& [key, a] : f.coeffs) all.push_back(a);
  return poly::lq_norm(all, q.value());
}

double coeff_norm(const CoeffTable& f, Exponent q) { return coeff_norm_table(f, q); }

// ---- schedule -----------------------------------------------------------------------

std::vector<long> Schedule::levels_in_case(int c) const {
  std::vector<long> out;
  for (const auto& lp : levels)
    if (lp.case_id == c) out.push_back(lp.level);
  return out;
}

void check_embedding(const Rational& s, Exponent p, Exponent q, long d) {
  if (d < 1) throw InputError("embedding: d must be >= 1");
  if (!(s > 0)) throw InputError("embedding: s must be > 0");
  if (q.inv < p.inv) throw InputError("embedding: need q <= p");
  if (!(q.inv - p.inv < s / d)) throw InputError("embedding: need 1/q - 1/p < s/d");
}

Schedule schedule(const Rational& s, Exponent p, Exponent q, long d, long base, long alpha, long beta) {
  check_embedding(s, p, q, d);
  if (base < 2) throw InputError("schedule: base must be >= 2");
  if (alpha < 1 || beta < 1) throw InputError("schedule: alpha and beta must be >= 1");
  Schedule sc;
  sc.base = base;
  sc.alpha = alpha;
  sc.beta = beta;
  sc.dim = d;
  sc.s = s;
  sc.p = p;
  sc.q = q;
  const Rational dq = d * q.inv;
  sc.kappa = s / (s + d * p.inv - dq);
  const long ab = alpha + beta;
  sc.ell_star = floor_long(2 * sc.kappa * ab);
  // W0 = ceil((alpha/2) log2 b): smallest w with 4^w >= b^alpha
  sc.W0 = 0;
  while (ipow(4, static_cast<unsigned long>(sc.W0)) < ipow(base, static_cast<unsigned long>(alpha))) ++sc.W0;
  sc.W0 = std::max(1L, sc.W0);
  sc.L0 = ceil_long(4 * (s + sc.kappa + sc.kappa * dq) * beta);
  if (sc.kappa > 1) sc.tau = (s / (q.inv - p.inv) - d) / 2;

  for (long ell = 0; ell <= sc.ell_star; ++ell) {
    LevelPlan lp;
    lp.level = ell;
    lp.W0 = sc.W0;
    lp.L0 = sc.L0;
    if (ell <= 2 * ab) {
      lp.delta = dq * ell + (s + 1) * (2 * ab - ell);
      if (ell <= 2 * beta) {
        lp.case_id = 1;
        lp.S = ceil_pow(base, lp.delta + make_rational(d * ell, 2) - dq * ell);
        lp.T = ceil_long((s + 1) * (2 + 2 * beta - ell) / d);
      } else {
        lp.case_id = 2;
        lp.S = ceil_pow(base, lp.delta + d * beta - dq * ell);
        lp.T = ceil_long(2 * (s + 1) / d);
      }
    } else {
      // only reachable when kappa > 1, so tau > 0
      lp.delta = 2 * d * ab * q.inv - sc.tau * (ell - 2 * ab) * q.inv;
      if (Rational(ell) <= 2 * ab + 2 * d * alpha / sc.tau) {
        lp.case_id = 3;
        lp.S = ipow_long(base, d * beta);
        lp.T = ceil_long(2 * d / sc.tau) + 2;
      } else {
        lp.case_id = 4;
        lp.S = ceil_pow(base, lp.delta / q.inv / 2);
        lp.T = ceil_long(2 * d / sc.tau + 2) * ceil_long(sc.tau * (make_rational(ell, 2) - ab) - d * alpha);
      }
    }
    sc.levels.push_back(lp);
  }
  return sc;
}

// ---- assembly -----------------------------------------------------------------------

PartNetwork assemble_part(const TargetFunction& f, Exponent p, long base, long alpha, long beta, const Rational& eps) {
  Schedule sc = schedule(f.s, p, f.q, f.dim, base, alpha, beta);
  const Rational top = 1 / Rational(ipow(base, static_cast<unsigned long>(sc.ell_star)));
  if (!(eps > 0) || !(eps < top)) throw InputError("assemble_part: need 0 < eps < b^-ell*");
  const long k = floor_long(f.s);
  std::vector<CoeffTable> tables = multilevel_tables(f, k, sc.ell_star, base);

  std::vector<Network> sequential, side_by_side;
  for (const auto& lp : sc.levels) {
    poly::PolyApproxParams params;
    params.delta = lp.delta;
    params.S = lp.S;
    params.T = lp.T;
    params.W0 = lp.W0;
    params.L0 = lp.L0;
    params.p = p.value();
    params.q = f.q.value();
    CoeffTable& t = tables[static_cast<std::size_t>(lp.level)];
    Network g = poly::pwpoly_net(t, params, eps);
    t = CoeffTable{};  // release the level's coefficients
    if (lp.case_id == 1 || lp.case_id == 4)
      sequential.push_back(std::move(g));
    else
      side_by_side.push_back(std::move(g));
  }
  std::vector<Network> groups;
  if (!sequential.empty()) groups.push_back(net::sum_sequential(std::move(sequential)));
  if (!side_by_side.empty()) groups.push_back(net::sum_parallel(std::move(side_by_side)));
  Network g = groups.size() == 1 ? std::move(groups.front()) : net::sum_parallel(std::move(groups));
  return PartNetwork{std::move(g), std::move(sc)};
}

Network median_net(long d, long j) {
  if (d < 1 || (d & (d - 1)) != 0) throw InputError("median_net: d must be a power of two");
  if (j < 1 || j > d) throw InputError("median_net: need 1 <= j <= d");
  const std::size_t n = static_cast<std::size_t>(d);
  std::vector<Network> stages;
  // bitonic sort, ascending; each stage is one hidden layer of 4 neurons per pair:
  // (a+b)+, (-a-b)+, (a-b)+, (b-a)+  ->  max, min
  for (std::size_t size = 2; size <= n; size *= 2)
    for (std::size_t stride = size / 2; stride > 0; stride /= 2) {
      net::AffineLayer hidden(2 * n, n);
      net::AffineLayer out(n, 2 * n);
      std::size_t slot = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t l = i ^ stride;
        if (l <= i) continue;
        const bool ascending = (i & size) == 0;
        const std::size_t lo = ascending ? i : l, hi = ascending ? l : i;
        const std::size_t h = slot;
        slot += 4;
        hidden.add(h, i, 1);
        hidden.add(h, l, 1);
        hidden.add(h + 1, i, -1);
        hidden.add(h + 1, l, -1);
        hidden.add(h + 2, i, 1);
        hidden.add(h + 2, l, -1);
        hidden.add(h + 3, i, -1);
        hidden.add(h + 3, l, 1);
        const Rational half = make_rational(1, 2);
        for (std::size_t t = 0; t < 4; ++t) {
          const Rational sym = t < 2 ? (t == 0 ? half : -half) : half;
          out.add(hi, h + t, sym);
          out.add(lo, h + t, t < 2 ? sym : -half);
        }
      }
      hidden.normalize();
      out.normalize();
      stages.push_back(Network(n, {std::move(hidden), std::move(out)}));
    }
  stages.push_back(net::select(n, {n - static_cast<std::size_t>(j)}));
  return net::compose_all(std::move(stages));
}

std::vector<long> primes(long n) {
  std::vector<long> out;
  for (long c = 2; static_cast<long>(out.size()) < n; ++c) {
    bool prime = true;
    for (long p : out) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) out.push_back(c);
  }
  return out;
}

Rational trifling_eps(const std::vector<long>& bases, const std::vector<long>& ell_stars) {
  if (bases.size() != ell_stars.size() || bases.empty()) throw InputError("trifling_eps: shape mismatch");
  // Anchors j / B_i with B_i = b_i^{l_i*}. Within one base the gap is 1/B_i. For
  // coprime B_i, B_j the values j B_j - j' B_i cover every integer, so the smallest
  // nonzero cross distance is exactly 1/(B_i B_j); coincident anchors (0 and 1) merge.
  std::vector<BigInt> B;
  for (std::size_t i = 0; i < bases.size(); ++i) B.push_back(ipow(bases[i], static_cast<unsigned long>(ell_stars[i])));
  Rational gap(1);
  for (std::size_t i = 0; i < B.size(); ++i) {
    if (B[i] > 1) gap = std::min(gap, Rational(Rational(1) / Rational(B[i])));
    for (std::size_t j = i + 1; j < B.size(); ++j) {
      BigInt g;
      mpz_gcd(g.get_mpz_t(), B[i].get_mpz_t(), B[j].get_mpz_t());
      if (g != 1) throw InputError("trifling_eps: bases must be pairwise coprime");
      if (B[i] > 1 && B[j] > 1) gap = std::min(gap, Rational(Rational(1) / Rational(B[i] * B[j])));
    }
  }
  return gap / 2;
}

FullNetwork assemble_full(const TargetFunction& f, Exponent p, long m, long n, bool keep_parts) {
  check_embedding(f.s, p, f.q, f.dim);
  long k = 0;
  while ((1L << k) < 2 * f.dim + 2) ++k;
  const long count = 1L << k;
  std::vector<long> bases = primes(count), alphas, betas, ell_stars;
  if (m < bases.back() || n < bases.back())
    throw InputError("assemble_full: need m, n >= " + std::to_string(bases.back()));
  for (long b : bases) {
    alphas.push_back(floor_log(b, m));
    betas.push_back(floor_log(b, n));
    ell_stars.push_back(schedule(f.s, p, f.q, f.dim, b, alphas.back(), betas.back()).ell_star);
  }
  const Rational eps = trifling_eps(bases, ell_stars);
  // one part at a time: peak memory is dominated by the largest part
  std::vector<Network> parts;
  for (std::size_t i = 0; i < bases.size(); ++i)
    parts.push_back(assemble_part(f, p, bases[i], alphas[i], betas[i], eps).net);
  Network g = keep_parts ? net::compose(net::concat(parts), median_net(count, count / 2))
                         : net::compose(net::concat(std::move(parts)), median_net(count, count / 2));
  if (!keep_parts) parts.clear();
  return FullNetwork{std::move(g), std::move(parts), std::move(bases), std::move(alphas), std::move(betas),
                     std::move(ell_stars), eps, k};
}

std::vector<std::size_t> good_bases(const FullNetwork& g, const std::vector<Rational>& x) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.bases.size(); ++i) {
    GridSpec spec{g.bases[i], g.ell_stars[i], static_cast<long>(x.size()), g.eps};
    if (grid::locate(spec, x).good) out.push_back(i);
  }
  return out;
}

// ---- norm estimate and rate harness -------------------------------------------------

double sobolev_norm_estimate(const TargetFunction& f) {
  if (f.s.get_den() != 1) throw InputError("sobolev_norm_estimate: integer s only");
  const long s = to_long(f.s.get_num());
  const long d = f.dim;
  const double qv = f.q.value();
  const bool sup = f.q.is_inf();
  const Quadrature rule = gauss_legendre(4);
  const long cells = std::max(2L, static_cast<long>(std::pow(65536.0, 1.0 / static_cast<double>(d))) / 4);
  const double h = std::pow(1e-16, 1.0 / static_cast<double>(s + 2));

  std::vector<MultiIndex> top;
  for (const auto& g : poly::multi_indices(d, s))
    if (degree_of(g) == s) top.push_back(g);

  // central difference of order r along each axis, tensorized
  auto derivative = [&](const MultiIndex& g, const std::vector<double>& x) {
    std::vector<std::pair<std::vector<double>, double>> pts{{x, 1.0}};
    for (std::size_t j = 0; j < g.size(); ++j) {
      const long r = g[j];
      if (r == 0) continue;
      std::vector<std::pair<std::vector<double>, double>> grown;
      for (const auto& [pt, w] : pts)
        for (long i = 0; i <= r; ++i) {
          auto y = pt;
          y[j] += (static_cast<double>(r) / 2 - static_cast<double>(i)) * h;
          const double c = (i % 2 ? -1 : 1) * binom(r, i) / std::pow(h, static_cast<double>(r));
          grown.emplace_back(std::move(y), w * c);
        }
      pts = std::move(grown);
    }
    double v = 0;
    for (const auto& [pt, w] : pts) v += w * f.eval(pt);
    return v;
  };

  double lq = 0, semi = 0;
  const std::size_t per = rule.nodes.size();
  long total = 1;
  for (long j = 0; j < d; ++j) total *= cells * static_cast<long>(per);
  std::vector<double> x(static_cast<std::size_t>(d));
  for (long t = 0; t < total; ++t) {
    long rest = t;
    double w = 1;
    for (long j = 0; j < d; ++j) {
      const long node = rest % static_cast<long>(per);
      rest /= static_cast<long>(per);
      const long cell = rest % cells;
      rest /= cells;
      x[static_cast<std::size_t>(j)] = (static_cast<double>(cell) + rule.nodes[static_cast<std::size_t>(node)]) / static_cast<double>(cells);
      w *= rule.weights[static_cast<std::size_t>(node)] / static_cast<double>(cells);
    }
    const double v = std::abs(f.eval(x));
    if (sup)
      lq = std::max(lq, v);
    else
      lq += w * std::pow(v, qv);
    for (const auto& g : top) {
      const double dv = std::abs(derivative(g, x));
      if (sup)
        semi = std::max(semi, dv);
      else
        semi += w * std::pow(dv, qv);
    }
  }
  if (sup) return std::max(lq, semi);
  return std::pow(lq + semi, 1 / qv);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("fit_slope: need at least two points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) throw InputError("fit_slope: all x values coincide");
  return sxy / sxx;
}

double lp_error(const TargetFunction& f, const Network& g, Exponent p, const RateOptions& opt) {
  if (opt.points < 1) throw InputError("lp_error: points must be >= 1");
  const long d = f.dim;
  const long per_axis = std::max(1L, static_cast<long>(std::llround(std::pow(static_cast<double>(opt.points), 1.0 / static_cast<double>(d)))));
  long total = 1;
  for (long j = 0; j < d; ++j) total *= per_axis;
  // stratified nodes: one uniform draw per sub-cube
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> nodes(static_cast<std::size_t>(total));
  for (long t = 0; t < total; ++t) {
    long rest = t;
    for (long j = 0; j < d; ++j) {
      nodes[static_cast<std::size_t>(t)].push_back((static_cast<double>(rest % per_axis) + unit(rng)) / static_cast<double>(per_axis));
      rest /= per_axis;
    }
  }
  std::vector<double> err(nodes.size());
  if (opt.mode == net::Mode::Rational) {
    const net::ExactEvaluator ev(g);
    std::vector<Rational> xr;
    for (std::size_t t = 0; t < nodes.size(); ++t) {
      xr.clear();
      for (double v : nodes[t]) xr.push_back(from_double(v));
      err[t] = std::abs(f.eval(nodes[t]) - to_double(ev(xr)[0]));
    }
  } else {
    const net::FloatEvaluator ev(g);
    for (std::size_t t = 0; t < nodes.size(); ++t) err[t] = std::abs(f.eval(nodes[t]) - ev(nodes[t])[0]);
  }
  if (p.is_inf()) return *std::max_element(err.begin(), err.end());
  const double pv = p.value();
  double acc = 0;
  for (double e : err) acc += std::pow(e, pv);
  return std::pow(acc / static_cast<double>(err.size()), 1 / pv);
}

RateReport measure_rate(const TargetFunction& f, Exponent p, const std::vector<std::pair<long, long>>& sizes,
                        const RateOptions& opt) {
  if (sizes.empty()) throw InputError("measure_rate: sizes must be nonempty");
  RateReport rep;
  rep.target = f.name;
  const double rate = -2 * to_double(f.s) / static_cast<double>(f.dim);
  // sizes with the same per-base (alpha_i, beta_i) give the same network: measure once
  std::map<std::vector<long>, RateRow> seen;
  for (const auto& [m, n] : sizes) {
    std::vector<long> key;
    long k = 0;
    while ((1L << k) < 2 * f.dim + 2) ++k;
    for (long b : primes(1L << k)) {
      key.push_back(m >= b ? floor_log(b, m) : 0);
      key.push_back(n >= b ? floor_log(b, n) : 0);
    }
    RateRow row;
    auto hit = seen.find(key);
    if (hit != seen.end()) {
      row = hit->second;
    } else {
      FullNetwork g = assemble_full(f, p, m, n, false);
      row.W = g.net.width();
      row.L = g.net.depth();
      row.error = lp_error(f, g.net, p, opt);
      seen.emplace(key, row);
    }
    row.m = m;
    row.n = n;
    rep.rows.push_back(row);
  }
  std::stable_sort(rep.rows.begin(), rep.rows.end(),
                   [](const RateRow& a, const RateRow& b) { return a.W * a.L < b.W * b.L; });
  // predicted: the first row's error carried along (WL)^{-2s/d}
  const double wl0 = static_cast<double>(rep.rows.front().W) * static_cast<double>(rep.rows.front().L);
  for (auto& row : rep.rows)
    row.predicted = rep.rows.front().error *
                    std::pow(static_cast<double>(row.W) * static_cast<double>(row.L) / wl0, rate);
  std::vector<double> xs, ys;
  for (auto& row : rep.rows) {
    xs.push_back(static_cast<double>(row.W) * static_cast<double>(row.L));
    ys.push_back(row.error);
    row.slope_so_far = xs.size() < 2 ? std::nan("") : fit_slope(xs, ys);
  }
  rep.slope = rep.rows.size() < 2 ? std::nan("") : rep.rows.back().slope_so_far;
  return rep;
}

std::string RateReport::csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "m,n,W,L,WL,error,predicted,slope_so_far\n";
  for (const auto& r : rows)
    os << r.m << ',' << r.n << ',' << r.W << ',' << r.L << ',' << r.W * r.L << ',' << r.error << ','
       << r.predicted << ',' << r.slope_so_far << '\n';
  return os.str();
}

}  // namespace relunet::sobolev
