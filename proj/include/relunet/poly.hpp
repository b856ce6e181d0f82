// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "relunet/codec.hpp"
#include "relunet/grid.hpp"
#include "relunet/network.hpp"

namespace relunet::poly {

using MultiIndex = std::vector<long>;

/// Piecewise polynomial sum_{i, gamma} a_{i,gamma} rho_{ell,i}^gamma on a b-adic grid.
struct PiecewisePoly {
  grid::GridSpec spec;
  long degree = 0;
  std::map<std::pair<grid::GridIndex, MultiIndex>, Rational> coeffs;

  /// Throws InputError on a bad grid index, a multi-index of the wrong length or |gamma| > k.
  void validate() const;
  /// All multi-indices with |gamma| <= degree, graded order.
  std::vector<MultiIndex> multi_indices() const;
  /// Coefficient vector of one gamma, ordered by flat cell index (length b^{d ell}).
  std::vector<Rational> gamma_coeffs(const MultiIndex& gamma) const;
};

/// Dense coefficients: values[g][flat cell index] for gammas[g]. Used for fine
/// grids where a map of rationals would not fit in memory.
struct CoeffTable {
  grid::GridSpec spec;
  long degree = 0;
  std::vector<MultiIndex> gammas;
  std::vector<std::vector<double>> values;

  /// Zero table with all multi-indices of degree <= k.
  static CoeffTable zeros(const grid::GridSpec& spec, long k);
  std::size_t cells() const;
  /// Nonzero entries as an exact piecewise polynomial.
  PiecewisePoly to_pwpoly() const;
};

/// All multi-indices in N^d with |gamma| <= k, graded then lexicographic.
std::vector<MultiIndex> multi_indices(long d, long k);

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PolyApproxParams {
  Rational delta;  // discretization exponent, b^delta quantization levels
  long S = 1;
  long T = 1;
  long W0 = 1;
  long L0 = 1;
  double p = kInf;
  double q = kInf;

  /// Coefficient-sparse iff delta q <= d ell.
  bool sparse(const grid::GridSpec& spec) const;
};

/// rho_{ell,i}^gamma(x): prod_j (b^ell x_j - i_j)^gamma_j on the cell of i, 0 elsewhere.
Rational basis_eval(const grid::GridSpec& spec, const grid::GridIndex& i, const MultiIndex& gamma,
                    const std::vector<Rational>& x);
/// Exact value of the piecewise polynomial at x in [0,1]^d.
Rational eval(const PiecewisePoly& f, const std::vector<Rational>& x);
double eval(const PiecewisePoly& f, const std::vector<double>& x);

/// g_{k,L} = h_{kL}, the interpolant of x^2 at j / 2^{kL} on [-1,1]; NN(k 2^k + 1, L).
net::Network square_net(long k, long L);
/// f_{k,L}(x, y) = 2 g((x+y)/2) - (g(x) + g(y))/2; NN(3 k 2^k + 3, L).
net::Network product_net(long k, long L);
/// P_gamma(y, z) ~ z prod y_j^gamma_j on [-1,1]^{d+1}, chaining product_net(W0 + 3, L0).
net::Network monomial_net(const MultiIndex& gamma, long W0, long L0);

/// Number of quantization levels Q = ceil(b^delta) (b^delta itself when delta is an integer).
BigInt quant_levels(long base, const Rational& delta);
/// a -> sgn(a) floor(Q |a|) / Q.
PiecewisePoly quantize_coeffs(const PiecewisePoly& f, const Rational& delta);
/// Largest integer below Q min{Q^q, b^{d ell}}^{1 - 1/q}, the l1 bound of the integer lift.
long lift_norm_bound(long base, const Rational& delta, double q, long d, long ell);

/// l_q norm of a coefficient vector (q = inf allowed).
double lq_norm(const std::vector<Rational>& a, double q);
double lq_norm(const std::vector<double>& a, double q);

/// Network approximating f on the good region Omega_{ell, eps}: grid index nets,
/// one rep_net per gamma on the quantized coefficients, and P_gamma.
net::Network pwpoly_net(const PiecewisePoly& f, const PolyApproxParams& params, const Rational& eps);

/// One gamma branch, (y, ind) with y in R^d and ind the 0-based flat index, to
/// scale * P_gamma(y, Q^{-1} u_{ind}). Exposed for the per-branch checks.
struct GammaBranch {
  net::Network net;
  Rational scale;  // normalization factor undone at the output
  BigInt levels;  // Q
  std::vector<long> lift;  // integer coefficients u
  long M = 0;
};
GammaBranch gamma_branch(const PiecewisePoly& f, const MultiIndex& gamma, const PolyApproxParams& params);
GammaBranch gamma_branch(const grid::GridSpec& spec, const MultiIndex& gamma, const std::vector<double>& a,
                         const PolyApproxParams& params);
/// pwpoly_net on a dense table.
net::Network pwpoly_net(const CoeffTable& f, const PolyApproxParams& params, const Rational& eps);
double eval(const CoeffTable& f, const std::vector<double>& x);
/// x -> (b^ell x - q_1(x), ind(x)), depth L0.
net::Network local_coordinates_net(const grid::GridSpec& spec, long L0);

std::string to_json(const PiecewisePoly& f);
PiecewisePoly pwpoly_from_json(const std::string& text);

}  // namespace relunet::poly
