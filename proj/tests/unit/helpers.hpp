// Shared fixtures for the unit tests.
#pragma once

#include <random>
#include <vector>

#include "relunet/network.hpp"

namespace testing {

using relunet::Rational;

inline Rational rand_rational(std::mt19937_64& rng, long span = 8, long den = 4) {
  std::uniform_int_distribution<long> num(-span * den, span * den);
  std::uniform_int_distribution<long> d(1, den);
  return relunet::make_rational(num(rng), d(rng));
}

/// Dense random network with the given layer dims (dims[0] = input).
inline relunet::net::Network random_net(std::mt19937_64& rng, const std::vector<std::size_t>& dims) {
  std::vector<relunet::net::AffineLayer> layers;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    relunet::net::AffineLayer layer(dims[l], dims[l - 1]);
    for (std::size_t r = 0; r < dims[l]; ++r) {
      for (std::size_t c = 0; c < dims[l - 1]; ++c) layer.add(r, c, rand_rational(rng, 2, 3));
      layer.bias[r] = rand_rational(rng, 2, 3);
    }
    layers.push_back(std::move(layer));
  }
  return relunet::net::Network(dims[0], std::move(layers));
}

inline std::vector<Rational> rand_point(std::mt19937_64& rng, std::size_t dim) {
  std::vector<Rational> x(dim);
  for (auto& v : x) v = rand_rational(rng, 3, 5);
  return x;
}

}  // namespace testing
