// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "relunet/network.hpp"
#include "relunet/pwl.hpp"

namespace relunet::grid {

/// Uniform b-adic grid of level `ell` on [0,1)^d with trifling-strip width eps.
struct GridSpec {
  long base = 2;
  long ell = 0;
  long dim = 1;
  Rational eps;

  /// b^ell cells per axis.
  BigInt cells() const;
  /// Throws InputError unless b >= 2, ell >= 0, d >= 1, 0 < eps < b^-ell.
  void validate() const;
};

using GridIndex = std::vector<long>;

BigInt flat_index(const GridSpec& spec, const GridIndex& i);

struct Location {
  GridIndex index;
  bool good = false;
};
Location locate(const GridSpec& spec, const std::vector<Rational>& x);

/// Staircase g_m: j on [j b^-m, (j+1) b^-m - eps], ramps of width eps in between,
/// constant b^m - 1 on the last cell.
pwl::PwlFunc index_staircase(long base, long m, const Rational& eps);

/// 1-d cell index of x on the good region, in NN(2 b^ceil(ell/L), L).
net::Network index_net_1d(const GridSpec& spec, long depth);
/// Flat index sum_j b^(ell (j-1)) q_1(x_j) on the good region.
net::Network index_net(const GridSpec& spec, long depth);

}  // namespace relunet::grid
