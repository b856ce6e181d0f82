// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relunet/network.hpp"

namespace relunet::bits {

/// Binary string with a binary point: the first `point` bits form the integer part.
struct BitString {
  std::vector<std::uint8_t> bits;
  std::size_t point = 0;

  /// Parses "0.1011", "10.0", ".01" or "101".
  static BitString parse(const std::string& text);
  std::string str() const;
};

Rational bin_value(const BitString& b);
/// Bin 0.b_0 b_1 ... for a fractional bit sequence.
Rational fraction_value(const std::vector<std::uint8_t>& bits);

/// Ramp slope parameter used by every extraction gadget for n-bit inputs.
Rational ramp_eps(int n);

/// x = Bin 0.x_1...x_n  ->  (x_1, ..., x_m, Bin 0.x_{m+1}...x_n); one hidden layer.
net::Network extract_heads(int n, int m);

/// x = Bin 0.x_1...x_n  ->  (Bin x_1...x_m.0, Bin 0.x_m...x_n); depth <= L.
net::Network extract_stream(int n, int m, int L);
/// Variant whose second output is the strict remainder Bin 0.x_{m+1}...x_n.
net::Network extract_stream_exclusive(int n, int m, int L);

/// i-fold composition of the tent map on [0,1], zero outside; one hidden layer.
net::Network sawtooth_net(int i);
/// Same function restricted to inputs t >= 0 (2^i neurons; continues linearly past 1).
net::Network sawtooth_halfline_net(int i);

/// h(z) = max(0, 1 - |z|); the Kronecker delta on the integers.
net::Network delta_net();

}  // namespace relunet::bits
