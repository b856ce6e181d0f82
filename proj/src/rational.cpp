// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#include "relunet/rational.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace relunet {

std::string to_string(const Rational& r) {
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

namespace {

Rational parse_decimal(const std::string& text) {
  // [sign] digits [. digits] [e|E [sign] digits]
  std::size_t pos = 0;
  bool neg = false;
  if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    neg = text[pos] == '-';
    ++pos;
  }
  std::string digits;
  long frac_digits = 0;
  bool seen_point = false;
  bool any = false;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (c >= '0' && c <= '9') {
      digits.push_back(c);
      any = true;
      if (seen_point) ++frac_digits;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!any) throw InputError("not a number: '" + text + "'");
  long exponent = 0;
  if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
    ++pos;
    std::size_t used = 0;
    try {
      exponent = std::stol(text.substr(pos), &used);
    } catch (const std::exception&) {
      throw InputError("bad exponent in '" + text + "'");
    }
    pos += used;
  }
  if (pos != text.size()) throw InputError("trailing characters in '" + text + "'");
  BigInt num(digits, 10);
  if (neg) num = -num;
  return make_rational(num) * power(Rational(10), exponent - frac_digits);
}

}  // namespace

Rational parse_rational(const std::string& raw) {
  std::string text;
  for (char c : raw)
    if (c != ' ') text.push_back(c);
  if (text.empty()) throw InputError("empty number");
  auto slash = text.find('/');
  if (slash == std::string::npos) return parse_decimal(text);
  std::string p = text.substr(0, slash);
  std::string q = text.substr(slash + 1);
  BigInt num, den;
  if (num.set_str(p[0] == '+' ? p.substr(1) : p, 10) != 0 ||
      den.set_str(q[0] == '+' ? q.substr(1) : q, 10) != 0)
    throw InputError("malformed rational '" + raw + "'");
  if (den == 0) throw InputError("zero denominator in '" + raw + "'");
  return make_rational(num, den);
}

Rational from_double(double v) {
  if (!std::isfinite(v)) throw InputError("non-finite number");
  Rational r(v);
  return r;
}

double to_double(const Rational& r) {
  // get_d truncates toward zero; pick the nearer neighbour exactly.
  double d = r.get_d();
  if (!std::isfinite(d)) return d;
  double up = std::nextafter(d, r > 0 ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity());
  if (!std::isfinite(up)) return d;
  Rational lo_gap = abs(r - Rational(d));
  Rational hi_gap = abs(Rational(up) - r);
  if (hi_gap < lo_gap) return up;
  if (hi_gap == lo_gap) {
    std::int64_t bits = 0;
    std::memcpy(&bits, &d, sizeof bits);
    if (bits & 1) return up;
  }
  return d;
}

BigInt floor_of(const Rational& r) {
  BigInt q;
  mpz_fdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
  return q;
}

BigInt ceil_of(const Rational& r) {
  BigInt q;
  mpz_cdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
  return q;
}

Rational power(const Rational& b, long e) {
  Rational out(1);
  if (e == 0) return out;
  unsigned long n = static_cast<unsigned long>(e < 0 ? -e : e);
  BigInt num, den;
  mpz_pow_ui(num.get_mpz_t(), b.get_num_mpz_t(), n);
  mpz_pow_ui(den.get_mpz_t(), b.get_den_mpz_t(), n);
  if (e < 0) std::swap(num, den);
  if (den == 0) throw InputError("division by zero in power");
  return make_rational(num, den);
}

BigInt ipow(long b, unsigned long e) {
  BigInt out;
  mpz_ui_pow_ui(out.get_mpz_t(), static_cast<unsigned long>(b), e);
  return out;
}

BigInt floor_root_power(const Rational& x, const BigInt& p, const BigInt& r) {
  if (x < 0 || p < 0 || r < 1) throw InputError("floor_root_power: bad arguments");
  unsigned long pe = mpz_get_ui(p.get_mpz_t());
  unsigned long re = mpz_get_ui(r.get_mpz_t());
  // y <= (n/d)^(p/r)  <=>  y^r * d^p <= n^p
  BigInt np, dp;
  mpz_pow_ui(np.get_mpz_t(), x.get_num_mpz_t(), pe);
  mpz_pow_ui(dp.get_mpz_t(), x.get_den_mpz_t(), pe);
  BigInt y;
  BigInt q = np / dp;
  mpz_root(y.get_mpz_t(), q.get_mpz_t(), re);
  auto fits = [&](const BigInt& c) {
    BigInt cr;
    mpz_pow_ui(cr.get_mpz_t(), c.get_mpz_t(), re);
    return cr * dp <= np;
  };
  while (fits(y + 1)) ++y;
  while (y > 0 && !fits(y)) --y;
  return y;
}

BigInt ceil_root_power(long b, const BigInt& p, const BigInt& r) {
  BigInt y = floor_root_power(Rational(b), p, r);
  unsigned long re = mpz_get_ui(r.get_mpz_t());
  BigInt target = ipow(b, mpz_get_ui(p.get_mpz_t()));
  BigInt yr;
  mpz_pow_ui(yr.get_mpz_t(), y.get_mpz_t(), re);
  if (yr == target) return y;
  return y + 1;
}

long ceil_log2(const Rational& x) {
  if (x <= 0) throw InputError("ceil_log2 of nonpositive value");
  long c = 0;
  Rational p(1);
  if (x >= 1) {
    while (p < x) {
      p *= 2;
      ++c;
    }
  } else {
    while (p / 2 >= x) {
      p /= 2;
      --c;
    }
  }
  return c;
}

long bit_length(const BigInt& n) {
  if (n <= 0) throw InputError("bit_length of nonpositive value");
  return static_cast<long>(mpz_sizeinbase(n.get_mpz_t(), 2));
}

long to_long(const BigInt& v) {
  if (!v.fits_slong_p()) throw InputError("integer out of range: " + v.get_str());
  return v.get_si();
}

}  // namespace relunet
