// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "relunet/grid.hpp"
#include "relunet/network.hpp"
#include "relunet/poly.hpp"

namespace relunet::sobolev {

/// Norm exponent in [1, inf], stored as its reciprocal (0 for inf) so that the
/// schedule formulas stay rational.
struct Exponent {
  Rational inv;

  static Exponent infinity() { return {Rational(0)}; }
  static Exponent of(long v) { return {make_rational(1, v)}; }
  /// "inf", an integer or a rational text.
  static Exponent parse(const std::string& text);
  bool is_inf() const { return inv == 0; }
  double value() const;
  std::string str() const;
};

struct TargetFunction {
  std::string name;
  long dim = 1;
  Rational s;
  Exponent q = Exponent::infinity();
  double declared_norm = 1;
  std::function<double(const std::vector<double>&)> eval;
};

/// Registered presets: sin, gaussian-bump, abs-power, bspline. The values are
/// divided by `scale` (1 keeps the raw function).
TargetFunction make_target(const std::string& preset, long d, const Rational& s, Exponent q, double scale = 1);
/// {"name", "d", "s", "q", "p", "expr"}; "scale" optional, "normalize": true divides by the norm estimate.
TargetFunction target_from_json(const std::string& text, Exponent* p_out = nullptr);

/// Gauss-Legendre nodes and weights on [0,1].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_legendre(int n);

/// Per-cell L2 projection onto local polynomials of total degree <= k,
/// tensor Gauss-Legendre with 2(k+1) nodes per axis.
poly::PiecewisePoly project(const TargetFunction& f, const grid::GridSpec& spec, long k);
/// Re-expands a piecewise polynomial on the grid `levels` levels finer (exact).
poly::PiecewisePoly refine(const poly::PiecewisePoly& f, long levels);
/// f - g on the same grid (exact).
poly::PiecewisePoly subtract(const poly::PiecewisePoly& f, const poly::PiecewisePoly& g);
/// f_0 = P_0, f_l = P_l - P_{l-1} with P_l the level-l projection, each on its own level.
std::vector<poly::PiecewisePoly> multilevel_decompose(const TargetFunction& f, long k, long ell_star, long base);
/// Same decomposition on dense tables (what the assembly uses).
std::vector<poly::CoeffTable> multilevel_tables(const TargetFunction& f, long k, long ell_star, long base);
/// l_q norm of all coefficients of one level.
double coeff_norm(const poly::PiecewisePoly& f, Exponent q);
double coeff_norm(const poly::CoeffTable& f, Exponent q);

struct LevelPlan {
  long level = 0;
  int case_id = 1;
  Rational delta;
  long S = 1;
  long T = 1;
  long W0 = 1;
  long L0 = 1;
};

struct Schedule {
  long base = 2;
  long alpha = 1;
  long beta = 1;
  long dim = 1;
  Rational s;
  Exponent p, q;
  Rational kappa;
  Rational tau;  // 0 when kappa = 1 (cases 3 and 4 are empty)
  long ell_star = 0;
  long W0 = 1;
  long L0 = 1;
  std::vector<LevelPlan> levels;

  std::vector<long> levels_in_case(int c) const;
};

/// Throws InputError unless q <= p and 1/q - 1/p < s/d.
void check_embedding(const Rational& s, Exponent p, Exponent q, long d);
Schedule schedule(const Rational& s, Exponent p, Exponent q, long d, long base, long alpha, long beta);

struct PartNetwork {
  net::Network net;
  Schedule plan;
};
/// g_{alpha,beta}: cases 1 and 4 summed sequentially, cases 2 and 3 in parallel.
PartNetwork assemble_part(const TargetFunction& f, Exponent p, long base, long alpha, long beta, const Rational& eps);

/// j-th largest of d = 2^k inputs through a bitonic network of k(k+1)/2 layers, width 2d.
net::Network median_net(long d, long j);

/// First n primes.
std::vector<long> primes(long n);

struct FullNetwork {
  net::Network net;
  std::vector<net::Network> parts;  // empty unless keep_parts
  std::vector<long> bases;
  std::vector<long> alphas;
  std::vector<long> betas;
  std::vector<long> ell_stars;
  Rational eps;
  long k = 0;  // 2^k approximants
};
/// Assembly over the first 2^k primes (2^k >= 2d + 2) with the median selector.
/// keep_parts = false drops the per-base networks once composed.
FullNetwork assemble_full(const TargetFunction& f, Exponent p, long m, long n, bool keep_parts = true);
/// Half of the minimal gap of the trifling anchors sum_i {j / b_i^{l_i*}}.
Rational trifling_eps(const std::vector<long>& bases, const std::vector<long>& ell_stars);
/// Indices i with x in the good region of base i.
std::vector<std::size_t> good_bases(const FullNetwork& g, const std::vector<Rational>& x);

/// (||f||_{L^q}^q + |f|_{W^{s,q}}^q)^{1/q} by composite quadrature and central differences.
double sobolev_norm_estimate(const TargetFunction& f);

struct RateRow {
  long m = 0;
  long n = 0;
  std::size_t W = 0;
  std::size_t L = 0;
  double error = 0;
  double predicted = 0;
  double slope_so_far = 0;
};

struct RateReport {
  std::string target;
  std::vector<RateRow> rows;
  double slope = 0;
  std::string csv() const;
};

struct RateOptions {
  long points = 256;
  unsigned long seed = 1;
  net::Mode mode = net::Mode::Rational;
};

/// Least-squares slope of log y against log x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);
/// L^p error of g against f on [0,1)^d: a jittered uniform grid (seeded), max for p = inf.
double lp_error(const TargetFunction& f, const net::Network& g, Exponent p, const RateOptions& opt);
RateReport measure_rate(const TargetFunction& f, Exponent p, const std::vector<std::pair<long, long>>& sizes,
                        const RateOptions& opt);

}  // namespace relunet::sobolev
