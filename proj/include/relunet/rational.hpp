// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace relunet {

using Rational = mpq_class;
using BigInt = mpz_class;

/// Thrown for dimension mismatches, malformed documents and violated preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Rational make_rational(long num, long den = 1) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline Rational make_rational(const BigInt& num, const BigInt& den = 1) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

/// "p/q" form, always with an explicit denominator.
std::string to_string(const Rational& r);

/// Accepts "p", "p/q", or a decimal literal such as "-0.125" or "1e-3"
/// (decimals are converted exactly).
Rational parse_rational(const std::string& text);

/// Exact value of a binary64.
Rational from_double(double v);

/// Nearest binary64 (ties to even).
double to_double(const Rational& r);

BigInt floor_of(const Rational& r);
BigInt ceil_of(const Rational& r);

/// b^e for integer e (negative allowed).
Rational power(const Rational& b, long e);
BigInt ipow(long b, unsigned long e);

/// Smallest integer y >= b^(p/r) for p >= 0, r >= 1 (exact).
BigInt ceil_root_power(long b, const BigInt& p, const BigInt& r);
/// Largest integer y <= x^(p/r) for rational x >= 0, p >= 0, r >= 1 (exact).
BigInt floor_root_power(const Rational& x, const BigInt& p, const BigInt& r);

/// Smallest c with 2^c >= x, for x > 0.
long ceil_log2(const Rational& x);
/// Number of binary digits of n >= 1.
long bit_length(const BigInt& n);

long to_long(const BigInt& v);

}  // namespace relunet
