// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "relunet/network.hpp"

namespace relunet::pwl {

/// Continuous piecewise-linear function on R: values at strictly increasing
/// breakpoints plus the slopes of the two unbounded pieces.
struct PwlFunc {
  std::vector<Rational> breakpoints;
  std::vector<Rational> values;
  Rational left_slope{0};
  Rational right_slope{0};

  /// Number of linear pieces on R (breakpoints + 1).
  std::size_t pieces() const { return breakpoints.size() + 1; }
  /// Throws InputError unless breakpoints are strictly increasing and sized like values.
  void validate() const;
};

Rational pwl_eval(const PwlFunc& f, const Rational& t);
/// Slope of the piece starting at breakpoint i (i = m-1 gives right_slope).
Rational slope_after(const PwlFunc& f, std::size_t i);

/// Interpolant through (xs[i], ys[i]) with the given outer slopes, dropping
/// breakpoints where the slope does not change.
PwlFunc from_samples(std::vector<Rational> xs, std::vector<Rational> ys, const Rational& left_slope,
                     const Rational& right_slope);
PwlFunc simplify(const PwlFunc& f);
bool is_affine(const PwlFunc& f);

/// Breakpoints, one midpoint per gap and one exterior point per side.
std::vector<Rational> probe_points(const PwlFunc& f);
/// Same probe set restricted to [t_1, t_m].
std::vector<Rational> interior_probe_points(const PwlFunc& f);
/// Canonical equality oracle: agreement on the union of both probe sets.
bool equal(const PwlFunc& f, const PwlFunc& g);
/// Network (1 -> 1) equals f on the given points, exactly.
bool agrees(const net::Network& g, const PwlFunc& f, const std::vector<Rational>& points);

/// Depth-1 realization, exact on R: width <= m+1, and <= m if left_slope = 0.
/// An affine f yields a purely affine network.
net::Network synth_shallow(const PwlFunc& f);

/// Realization on [t_1, t_m] within (6W+2, 2L) when the pieces on that
/// interval number at most 6 W^2 L. Throws InputError otherwise.
net::Network synth_deep(const PwlFunc& f, net::SizeBudget budget);

std::string to_json(const PwlFunc& f, net::Mode mode = net::Mode::Rational);
PwlFunc pwl_from_json(const std::string& text);

}  // namespace relunet::pwl
