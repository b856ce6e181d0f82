// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "relunet/bits.hpp"
#include "relunet/network.hpp"

namespace relunet::codec {

enum class Regime { Sparse, Dense };

const char* regime_name(Regime r);

/// Integer vector x in Z^N.
struct IntVector {
  std::vector<long> x;

  std::size_t size() const { return x.size(); }
  long ell1() const;
  long max_abs() const;
};

struct Token {
  long f = 0;  // index step
  long t = 0;  // value increment
  bool operator==(const Token&) const = default;
};

/// Token stream, its bit string and the anchor sequences used by the decoder.
struct SparseCode {
  Regime regime = Regime::Sparse;
  long N = 0;
  long M = 0;
  long S = 0;
  std::vector<Token> tokens;
  bits::BitString bits;
  std::vector<long> anchors_i;  // 1-based token positions, i_0 = 1, i_rho = R + 1
  std::vector<long> anchors_j;  // coordinate offsets, j_0 = 0, j_rho = N
  long tau = 0;
  int f_width = 0;
  int t_width = 0;

  long rho() const { return static_cast<long>(anchors_i.size()) - 1; }
  int block_bits() const { return f_width + t_width; }
};

/// Regime, tau and token widths for the given parameters (no vector needed).
struct CodeLayout {
  Regime regime;
  long tau;
  int f_width;
  int t_width;
};
CodeLayout layout(long N, long M, long S);

/// Requires ||x||_1 <= M and ||x||_inf < S.
SparseCode encode(const IntVector& x, long M, long S);

/// Re-reads the tokens from `bits`, checks them and the anchors, and applies the
/// block decoding identity with plain integer arithmetic.
IntVector decode_reference(const SparseCode& code);

/// Throws InputError when an anchor invariant fails.
void check_anchors(const SparseCode& code);

/// Segment suffix code r_k: segment k's blocks padded with zero blocks to 2 tau blocks.
Rational segment_code(const SparseCode& code, long k);

/// J(n) = n - j_k and R(n) = r_k on j_k < n <= j_{k+1}, each within (6 W1 + 2, 2 L1).
std::pair<net::Network, net::Network> staircase_nets(const SparseCode& code, long W1, long L1);

/// One decoder block: (z, r, Sigma) -> (z - f_1, r', Sigma + t_1 delta(z - f_1)), where r
/// holds 2 tau blocks of (f_width + t_width) bits.
net::Network block_step_net(Regime regime, int f_width, int t_width, long tau, long T);

/// Parameters of the vector representation (the shared W1, L1 and the size bound).
struct RepPlan {
  Regime regime;
  long S;  // after clamping S <= M
  long tau;
  long W1;
  long L1;
  net::SizeBudget bound;
};
RepPlan rep_plan(long N, long M, long S, long T);

/// Network g with g(n) = x_n for n = 1..N.
net::Network rep_net(const IntVector& x, long M, long S, long T);

std::string to_json(const SparseCode& code);
SparseCode code_from_json(const std::string& text);

}  // namespace relunet::codec
