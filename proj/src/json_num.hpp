// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
// Number encoding shared by every JSON document: "p/q" strings in rational
// mode, binary64 numbers in float mode.
#pragma once

#include <string>

#include "json.hpp"
#include "relunet/network.hpp"

namespace relunet::detail {

using json = nlohmann::json;

inline json encode_num(const Rational& v, net::Mode mode) {
  if (mode == net::Mode::Float) return to_double(v);
  return to_string(v);
}

/// Rational mode also accepts plain JSON integers and decimal strings.
inline Rational decode_num(const json& j, net::Mode mode) {
  if (mode == net::Mode::Float) {
    if (!j.is_number()) throw InputError("float-mode document expects JSON numbers");
    return from_double(j.get<double>());
  }
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long>());
  throw InputError("rational-mode document expects \"p/q\" strings");
}

inline net::Mode parse_mode(const std::string& m) {
  if (m == "float") return net::Mode::Float;
  if (m == "rational") return net::Mode::Rational;
  throw InputError("unknown mode '" + m + "'");
}

inline const char* mode_name(net::Mode m) { return m == net::Mode::Float ? "float" : "rational"; }

}  // namespace relunet::detail
