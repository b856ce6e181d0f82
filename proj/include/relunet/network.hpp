// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "relunet/rational.hpp"

namespace relunet::net {

/// Evaluation/serialization mode. Float networks hold weights that are exact
/// binary64 values; rational networks hold arbitrary rationals.
enum class Mode { Rational, Float };

/// One coefficient of an affine expression (builder-side).
struct Term {
  std::uint32_t col;
  Rational value;
};

/// Stored weight: column plus an index into the layer's value pool.
struct Entry {
  std::uint32_t col;
  std::uint32_t id;
};

/// y = W x + b with W stored row-sparse. Weight values are interned per layer,
/// since constructions reuse a handful of distinct values across many entries.
class AffineLayer {
 public:
  std::size_t in_dim = 0;
  std::vector<std::vector<Entry>> rows;
  std::vector<Rational> bias;

  AffineLayer() = default;
  AffineLayer(std::size_t out_dim, std::size_t in_dim_);

  std::size_t out_dim() const { return rows.size(); }
  /// Accumulates into W[r][c]; duplicates are merged by normalize().
  void add(std::size_t r, std::size_t c, const Rational& v);
  /// Sorts entries, merges duplicates, drops zeros.
  void normalize();
  Rational at(std::size_t r, std::size_t c) const;
  std::size_t nnz() const;
  const Rational& weight(const Entry& e) const { return pool_[e.id]; }
  const std::vector<Rational>& pool() const { return pool_; }
  /// Id of v in the pool, inserting it if new.
  std::uint32_t intern(const Rational& v);
  /// Replaces every weight w by fn(w) (bias untouched).
  template <class Fn>
  void map_weights(Fn fn) {
    std::vector<Rational> old = std::move(pool_);
    pool_.clear();
    index_.clear();
    std::vector<std::uint32_t> remap(old.size());
    for (std::size_t i = 0; i < old.size(); ++i) remap[i] = intern(fn(old[i]));
    for (auto& row : rows)
      for (auto& e : row) e.id = remap[e.id];
  }

 private:
  struct Hash {
    std::size_t operator()(const Rational& v) const;
  };
  struct Eq {
    bool operator()(const Rational& a, const Rational& b) const { return mpq_equal(a.get_mpq_t(), b.get_mpq_t()) != 0; }
  };
  std::vector<Rational> pool_;
  std::unordered_map<Rational, std::uint32_t, Hash, Eq> index_;
};

struct SizeBudget {
  std::size_t width = 0;
  std::size_t depth = 0;
};

/// Affine layers with ReLU after every layer except the last.
class Network {
 public:
  Network(std::size_t input_dim, std::vector<AffineLayer> layers, Mode mode = Mode::Rational);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return layers_.back().out_dim(); }
  std::size_t depth() const { return layers_.size() - 1; }
  std::size_t width() const;
  std::vector<std::size_t> hidden_dims() const;
  const std::vector<AffineLayer>& layers() const { return layers_; }
  Mode mode() const { return mode_; }
  std::size_t nnz() const;

  /// Moves the layers out (used by the calculus to avoid copies).
  std::vector<AffineLayer> release_layers() &&;

 private:
  std::size_t input_dim_;
  std::vector<AffineLayer> layers_;
  Mode mode_;
};

SizeBudget size_of(const Network& net);

/// Exact forward pass. Throws InputError on a length mismatch.
std::vector<Rational> evaluate(const Network& net, const std::vector<Rational>& x);
/// binary64 forward pass (weights rounded to nearest double).
std::vector<double> evaluate(const Network& net, const std::vector<double>& x);

/// Precompiled binary64 evaluator for repeated evaluation.
class FloatEvaluator {
 public:
  explicit FloatEvaluator(const Network& net);
  std::vector<double> operator()(const std::vector<double>& x) const;
  double scalar(double x) const;
  std::size_t input_dim() const { return input_dim_; }

 private:
  struct Layer {
    std::vector<std::uint32_t> row_ptr;
    std::vector<std::uint32_t> cols;
    std::vector<double> vals;
    std::vector<double> bias;
  };
  std::size_t input_dim_;
  std::vector<Layer> layers_;
};

/// Precompiled exact evaluator. Each layer's weights are scaled to integers over
/// the layer's common denominator, so a pass is integer multiply-adds plus one
/// gcd reduction per layer. Keeps a pointer to `net`, which must outlive it.
class ExactEvaluator {
 public:
  explicit ExactEvaluator(const Network& net);
  std::vector<Rational> operator()(const std::vector<Rational>& x) const;

 private:
  struct Layer {
    BigInt scale;
    std::vector<BigInt> weights;  // by pool id
    std::vector<BigInt> bias;
    // int64 copies when scale, weights and bias all fit; empty otherwise
    bool small = false;
    std::int64_t scale64 = 1;
    std::vector<std::int64_t> weights64;
    std::vector<std::int64_t> bias64;
  };
  // Machine-integer pass; false on overflow, leaving the caller to redo it with GMP.
  bool run_small(const std::vector<Rational>& x, std::vector<Rational>& out) const;
  const Network* net_;
  std::vector<Layer> layers_;
  std::size_t max_dim_ = 0;
};

/// Rounds every parameter to binary64 and marks the network as float mode.
Network lower(const Network& net);

// ---- construction helpers -------------------------------------------------

/// Purely affine network x -> A x + b.
Network affine(AffineLayer layer, Mode mode = Mode::Rational);
/// Affine map from a dense matrix.
Network affine(const std::vector<std::vector<Rational>>& weights, const std::vector<Rational>& bias);
/// x -> x on R^dim through `depth` ReLU layers (2 neurons per coordinate, or
/// 1 when the caller guarantees nonnegative inputs). depth 0 gives the affine identity.
Network identity(std::size_t dim, std::size_t depth = 1, bool nonneg = false);
/// x -> (x_{idx[0]}, x_{idx[1]}, ...).
Network select(std::size_t input_dim, const std::vector<std::size_t>& idx);

/// f2 o f1; affine layers fuse, so the size is (max W, L1 + L2).
Network compose(Network f1, Network f2);
/// parts[n-1] o ... o parts[0].
Network compose_all(std::vector<Network> parts);

/// Extends f to the given depth without changing its function. A network with a
/// hidden layer repeats its last hidden layer (post-ReLU, hence nonnegative), so
/// the width does not grow. An affine network gets an identity chain on its
/// outputs, with 1 neuron per output if `nonneg` else 2.
Network pad_depth(Network f, std::size_t depth, bool nonneg = false);

/// Block-diagonal stacking: (x_1, ..., x_n) -> (f_1(x_1), ..., f_n(x_n)).
/// nonneg[i] marks branches whose outputs are known to be nonnegative.
Network parallel(std::vector<Network> parts, const std::vector<bool>& nonneg = {});
/// x -> (f_1(x), ..., f_n(x)); size (sum W_i, max L_i).
Network concat(std::vector<Network> parts, const std::vector<bool>& nonneg = {});
/// Sum evaluated in parallel; size (sum W_i, max L_i).
Network sum_parallel(std::vector<Network> parts);
/// Sum evaluated stage by stage, memorizing the input (2d neurons) and the
/// running sum (2k neurons); size (max W_i + 2d + 2k, sum L_i).
Network sum_sequential(std::vector<Network> parts);
/// Output map y -> A y + b applied after f.
Network then_affine(Network f, const std::vector<std::vector<Rational>>& weights,
                    const std::vector<Rational>& bias);
/// c * f.
Network scale(Network f, const Rational& c);

// ---- serialization --------------------------------------------------------

/// JSON document; layers above 2^16 cells use the sparse form
/// {"bias", "entries": [[row, col, num], ...], "out_dim"} instead of "weights".
std::string serialize(const Network& net);
void serialize(const Network& net, std::ostream& os);
Network deserialize(const std::string& text);

}  // namespace relunet::net
