// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#include "relunet/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json_num.hpp"

namespace relunet::net {

using json = nlohmann::json;

// ---- AffineLayer ------------------------------------------------------------

AffineLayer::AffineLayer(std::size_t out_dim, std::size_t in_dim_)
    : in_dim(in_dim_), rows(out_dim), bias(out_dim, Rational(0)) {}

std::size_t AffineLayer::Hash::operator()(const Rational& v) const {
  auto limbs = [](const mpz_t z) {
    std::size_t h = static_cast<std::size_t>(z->_mp_size) * 0x9e3779b97f4a7c15ULL;
    const int n = std::abs(z->_mp_size);
    for (int i = 0; i < n; ++i) h = (h ^ static_cast<std::size_t>(z->_mp_d[i])) * 0x100000001b3ULL;
    return h;
  };
  return limbs(mpq_numref(v.get_mpq_t())) * 31 + limbs(mpq_denref(v.get_mpq_t()));
}

std::uint32_t AffineLayer::intern(const Rational& v) {
  auto it = index_.find(v);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(pool_.size());
  pool_.push_back(v);
  index_.emplace(v, id);
  return id;
}

void AffineLayer::add(std::size_t r, std::size_t c, const Rational& v) {
  if (r >= rows.size() || c >= in_dim) throw InputError("AffineLayer::add: index out of range");
  if (sgn(v) == 0) return;
  rows[r].push_back(Entry{static_cast<std::uint32_t>(c), intern(v)});
}

void AffineLayer::normalize() {
  std::vector<char> zero(pool_.size());
  bool any_zero = false;
  for (std::size_t i = 0; i < pool_.size(); ++i) any_zero |= (zero[i] = sgn(pool_[i]) == 0);
  const auto by_col = [](const Entry& a, const Entry& b) { return a.col < b.col; };
  for (auto& row : rows) {
    if (any_zero)
      row.erase(std::remove_if(row.begin(), row.end(), [&](const Entry& e) { return zero[e.id] != 0; }), row.end());
    if (row.size() < 2) continue;
    if (!std::is_sorted(row.begin(), row.end(), by_col)) std::sort(row.begin(), row.end(), by_col);
    bool dup = false;
    for (std::size_t i = 1; i < row.size() && !dup; ++i) dup = row[i].col == row[i - 1].col;
    if (!dup) continue;
    std::vector<Entry> merged;
    merged.reserve(row.size());
    for (std::size_t i = 0; i < row.size();) {
      std::size_t j = i + 1;
      if (j < row.size() && row[j].col == row[i].col) {
        Rational s = pool_[row[i].id];
        for (; j < row.size() && row[j].col == row[i].col; ++j) s += pool_[row[j].id];
        if (sgn(s) != 0) merged.push_back(Entry{row[i].col, intern(s)});
      } else {
        merged.push_back(row[i]);
      }
      i = j;
    }
    row = std::move(merged);
  }
}

Rational AffineLayer::at(std::size_t r, std::size_t c) const {
  Rational s(0);
  for (const auto& e : rows.at(r))
    if (e.col == c) s += pool_[e.id];
  return s;
}

std::size_t AffineLayer::nnz() const {
  std::size_t n = 0;
  for (const auto& row : rows) n += row.size();
  return n;
}

// ---- Network ----------------------------------------------------------------

Network::Network(std::size_t input_dim, std::vector<AffineLayer> layers, Mode mode)
    : input_dim_(input_dim), layers_(std::move(layers)), mode_(mode) {
  if (input_dim_ == 0) throw InputError("network input dimension must be positive");
  if (layers_.empty()) throw InputError("network needs at least one layer");
  std::size_t dim = input_dim_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    if (layer.in_dim != dim) throw InputError("layer dimensions do not chain");
    if (layer.bias.size() != layer.out_dim())
      throw InputError("bias length differs from weight row count");
    if (layer.out_dim() == 0) throw InputError("zero-width layer");
    for (const auto& row : layer.rows)
      for (const auto& e : row)
        if (e.col >= dim) throw InputError("weight column out of range");
    layer.normalize();
    dim = layer.out_dim();
  }
}

std::size_t Network::width() const {
  std::size_t w = 0;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) w = std::max(w, layers_[l].out_dim());
  return w;
}

std::vector<std::size_t> Network::hidden_dims() const {
  std::vector<std::size_t> d;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) d.push_back(layers_[l].out_dim());
  return d;
}

std::size_t Network::nnz() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.nnz();
  return n;
}

std::vector<AffineLayer> Network::release_layers() && { return std::move(layers_); }

SizeBudget size_of(const Network& net) { return SizeBudget{net.width(), net.depth()}; }

// ---- evaluation -------------------------------------------------------------

std::vector<Rational> evaluate(const Network& net, const std::vector<Rational>& x) { return ExactEvaluator(net)(x); }

ExactEvaluator::ExactEvaluator(const Network& net) : net_(&net), max_dim_(net.input_dim()) {
  for (const auto& layer : net.layers()) {
    Layer c;
    c.scale = 1;
    for (const auto& w : layer.pool()) mpz_lcm(c.scale.get_mpz_t(), c.scale.get_mpz_t(), w.get_den_mpz_t());
    for (const auto& b : layer.bias) mpz_lcm(c.scale.get_mpz_t(), c.scale.get_mpz_t(), b.get_den_mpz_t());
    auto lift = [&](const Rational& v) {
      BigInt out;
      mpz_divexact(out.get_mpz_t(), c.scale.get_mpz_t(), v.get_den_mpz_t());
      out *= v.get_num();
      return out;
    };
    c.weights.reserve(layer.pool().size());
    for (const auto& w : layer.pool()) c.weights.push_back(lift(w));
    c.bias.reserve(layer.bias.size());
    for (const auto& b : layer.bias) c.bias.push_back(lift(b));
    auto fits = [](const BigInt& v) { return mpz_sizeinbase(v.get_mpz_t(), 2) <= 62; };
    c.small = fits(c.scale) && std::all_of(c.weights.begin(), c.weights.end(), fits) &&
              std::all_of(c.bias.begin(), c.bias.end(), fits);
    if (c.small) {
      c.scale64 = c.scale.get_si();
      for (const auto& w : c.weights) c.weights64.push_back(w.get_si());
      for (const auto& b : c.bias) c.bias64.push_back(b.get_si());
    }
    layers_.push_back(std::move(c));
    max_dim_ = std::max(max_dim_, layer.out_dim());
  }
}

bool ExactEvaluator::run_small(const std::vector<Rational>& x, std::vector<Rational>& out) const {
  using i128 = __int128;
  constexpr std::int64_t kLimit = std::int64_t{1} << 62;
  for (const auto& c : layers_)
    if (!c.small) return false;
  std::int64_t den = 1;
  for (const auto& v : x) {
    if (!v.get_den().fits_slong_p()) return false;
    const std::int64_t d = v.get_den().get_si();
    const i128 l = i128(den / std::gcd(den, d)) * d;
    if (l >= kLimit) return false;
    den = static_cast<std::int64_t>(l);
  }
  std::vector<std::int64_t> cur(max_dim_), next(max_dim_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i].get_num().fits_slong_p()) return false;
    i128 v = i128(den / x[i].get_den().get_si()) * x[i].get_num().get_si();
    if (v >= kLimit || v <= -kLimit) return false;
    cur[i] = static_cast<std::int64_t>(v);
  }
  const auto& layers = net_->layers();
  std::size_t dim = x.size();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const Layer& c = layers_[l];
    const bool hidden = l + 1 < layers.size();
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      i128 acc = i128(c.bias64[r]) * den;  // both below 2^62
      for (const auto& e : layer.rows[r]) {
        const std::int64_t xv = cur[e.col];
        if (xv != 0 && __builtin_add_overflow(acc, i128(c.weights64[e.id]) * xv, &acc)) return false;
      }
      if (hidden && acc < 0) acc = 0;
      if (acc >= kLimit || acc <= -kLimit) return false;
      next[r] = static_cast<std::int64_t>(acc);
    }
    dim = layer.out_dim();
    const i128 d = i128(den) * c.scale64;
    if (d >= kLimit) return false;
    den = static_cast<std::int64_t>(d);
    std::int64_t g = den;
    for (std::size_t r = 0; r < dim && g != 1; ++r) g = std::gcd(g, next[r]);
    if (g > 1) {
      for (std::size_t r = 0; r < dim; ++r) next[r] /= g;
      den /= g;
    }
    cur.swap(next);
  }
  out.resize(dim);
  for (std::size_t r = 0; r < dim; ++r) out[r] = make_rational(cur[r], den);
  return true;
}

std::vector<Rational> ExactEvaluator::operator()(const std::vector<Rational>& x) const {
  if (x.size() != net_->input_dim()) throw InputError("input length differs from input_dim");
  if (std::vector<Rational> fast; run_small(x, fast)) return fast;
  // activations are cur[i] / den with one shared positive denominator
  BigInt den = 1;
  for (const auto& v : x) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), v.get_den_mpz_t());
  std::vector<BigInt> cur(max_dim_), next(max_dim_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mpz_divexact(cur[i].get_mpz_t(), den.get_mpz_t(), x[i].get_den_mpz_t());
    cur[i] *= x[i].get_num();
  }
  const auto& layers = net_->layers();
  std::size_t dim = x.size();
  BigInt g;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const Layer& c = layers_[l];
    const bool hidden = l + 1 < layers.size();
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      mpz_ptr acc = next[r].get_mpz_t();
      mpz_mul(acc, c.bias[r].get_mpz_t(), den.get_mpz_t());
      for (const auto& e : layer.rows[r]) {
        mpz_srcptr xv = cur[e.col].get_mpz_t();
        if (mpz_sgn(xv) != 0) mpz_addmul(acc, c.weights[e.id].get_mpz_t(), xv);
      }
      if (hidden && mpz_sgn(acc) < 0) mpz_set_ui(acc, 0);
    }
    dim = layer.out_dim();
    den *= c.scale;
    if (den != 1) {
      g = den;
      for (std::size_t r = 0; r < dim && g != 1; ++r)
        if (mpz_sgn(next[r].get_mpz_t()) != 0) mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), next[r].get_mpz_t());
      if (g != 1) {
        for (std::size_t r = 0; r < dim; ++r) mpz_divexact(next[r].get_mpz_t(), next[r].get_mpz_t(), g.get_mpz_t());
        mpz_divexact(den.get_mpz_t(), den.get_mpz_t(), g.get_mpz_t());
      }
    }
    cur.swap(next);
  }
  std::vector<Rational> out(dim);
  for (std::size_t r = 0; r < dim; ++r) out[r] = make_rational(cur[r], den);
  return out;
}

FloatEvaluator::FloatEvaluator(const Network& net) : input_dim_(net.input_dim()) {
  for (const auto& layer : net.layers()) {
    Layer fl;
    fl.row_ptr.reserve(layer.out_dim() + 1);
    fl.row_ptr.push_back(0);
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      for (const auto& e : layer.rows[r]) {
        fl.cols.push_back(e.col);
        fl.vals.push_back(to_double(layer.weight(e)));
      }
      fl.row_ptr.push_back(static_cast<std::uint32_t>(fl.cols.size()));
      fl.bias.push_back(to_double(layer.bias[r]));
    }
    layers_.push_back(std::move(fl));
  }
}

std::vector<double> FloatEvaluator::operator()(const std::vector<double>& x) const {
  if (x.size() != input_dim_) throw InputError("input length differs from input_dim");
  std::vector<double> cur = x;
  std::vector<double> next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    std::size_t out = L.bias.size();
    next.resize(out);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = L.bias[r];
      for (std::uint32_t k = L.row_ptr[r]; k < L.row_ptr[r + 1]; ++k) acc += L.vals[k] * cur[L.cols[k]];
      if (l + 1 < layers_.size() && !(acc > 0.0)) acc = 0.0;
      next[r] = acc;
    }
    cur.swap(next);
  }
  return cur;
}

double FloatEvaluator::scalar(double x) const { return (*this)(std::vector<double>{x}).at(0); }

std::vector<double> evaluate(const Network& net, const std::vector<double>& x) {
  return FloatEvaluator(net)(x);
}

Network lower(const Network& net) {
  std::vector<AffineLayer> layers = net.layers();
  for (auto& layer : layers) {
    layer.map_weights([](const Rational& w) { return Rational(to_double(w)); });
    for (auto& b : layer.bias) b = Rational(to_double(b));
  }
  return Network(net.input_dim(), std::move(layers), Mode::Float);
}

// ---- construction helpers ---------------------------------------------------

namespace {

Mode join(Mode a, Mode b) { return (a == Mode::Float || b == Mode::Float) ? Mode::Float : Mode::Rational; }

// B * A as affine maps: x -> B (A x + a) + c.
AffineLayer fuse(const AffineLayer& A, const AffineLayer& B) {
  if (B.in_dim != A.out_dim()) throw InputError("compose: dimension mismatch");
  AffineLayer out(B.out_dim(), A.in_dim);
  Rational tmp;
  // products of pool values, memoized per (B id, A id) pair
  std::unordered_map<std::uint64_t, std::uint32_t> products;
  for (std::size_t r = 0; r < B.out_dim(); ++r) {
    Rational b = B.bias[r];
    auto& acc = out.rows[r];
    for (const auto& e : B.rows[r]) {
      mpq_mul(tmp.get_mpq_t(), B.weight(e).get_mpq_t(), A.bias[e.col].get_mpq_t());
      b += tmp;
      for (const auto& a : A.rows[e.col]) {
        const std::uint64_t key = (static_cast<std::uint64_t>(e.id) << 32) | a.id;
        auto it = products.find(key);
        if (it == products.end()) {
          mpq_mul(tmp.get_mpq_t(), B.weight(e).get_mpq_t(), A.weight(a).get_mpq_t());
          it = products.emplace(key, out.intern(tmp)).first;
        }
        acc.push_back(Entry{a.col, it->second});
      }
    }
    out.bias[r] = b;
  }
  out.normalize();
  return out;
}

}  // namespace

Network affine(AffineLayer layer, Mode mode) {
  std::size_t in = layer.in_dim;
  std::vector<AffineLayer> layers;
  layers.push_back(std::move(layer));
  return Network(in, std::move(layers), mode);
}

Network affine(const std::vector<std::vector<Rational>>& weights, const std::vector<Rational>& bias) {
  if (weights.empty()) throw InputError("affine: empty weight matrix");
  if (weights.size() != bias.size()) throw InputError("bias length differs from weight row count");
  AffineLayer layer(weights.size(), weights[0].size());
  for (std::size_t r = 0; r < weights.size(); ++r) {
    if (weights[r].size() != layer.in_dim) throw InputError("ragged weight matrix");
    for (std::size_t c = 0; c < layer.in_dim; ++c) layer.add(r, c, weights[r][c]);
    layer.bias[r] = bias[r];
  }
  return affine(std::move(layer));
}

Network identity(std::size_t dim, std::size_t depth, bool nonneg) {
  if (depth == 0) {
    AffineLayer id(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) id.add(i, i, 1);
    return affine(std::move(id));
  }
  std::size_t per = nonneg ? 1 : 2;
  std::vector<AffineLayer> layers;
  AffineLayer first(per * dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    first.add(per * i, i, 1);
    if (!nonneg) first.add(per * i + 1, i, -1);
  }
  layers.push_back(std::move(first));
  for (std::size_t l = 1; l < depth; ++l) {
    AffineLayer mid(per * dim, per * dim);
    for (std::size_t i = 0; i < per * dim; ++i) mid.add(i, i, 1);
    layers.push_back(std::move(mid));
  }
  AffineLayer last(dim, per * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    last.add(i, per * i, 1);
    if (!nonneg) last.add(i, per * i + 1, -1);
  }
  layers.push_back(std::move(last));
  return Network(dim, std::move(layers));
}

Network select(std::size_t input_dim, const std::vector<std::size_t>& idx) {
  AffineLayer layer(idx.size(), input_dim);
  for (std::size_t r = 0; r < idx.size(); ++r) layer.add(r, idx[r], 1);
  return affine(std::move(layer));
}

Network compose(Network f1, Network f2) {
  if (f1.output_dim() != f2.input_dim()) throw InputError("compose: f1 output dim differs from f2 input dim");
  Mode mode = join(f1.mode(), f2.mode());
  std::size_t in = f1.input_dim();
  auto l1 = std::move(f1).release_layers();
  auto l2 = std::move(f2).release_layers();
  std::vector<AffineLayer> layers;
  layers.reserve(l1.size() + l2.size() - 1);
  for (std::size_t i = 0; i + 1 < l1.size(); ++i) layers.push_back(std::move(l1[i]));
  layers.push_back(fuse(l1.back(), l2.front()));
  for (std::size_t i = 1; i < l2.size(); ++i) layers.push_back(std::move(l2[i]));
  return Network(in, std::move(layers), mode);
}

Network compose_all(std::vector<Network> parts) {
  if (parts.empty()) throw InputError("compose_all: empty sequence");
  Mode mode = Mode::Rational;
  for (const auto& p : parts) mode = join(mode, p.mode());
  for (std::size_t i = 1; i < parts.size(); ++i)
    if (parts[i - 1].output_dim() != parts[i].input_dim()) throw InputError("compose_all: dimension mismatch");
  std::size_t in = parts.front().input_dim();
  std::vector<AffineLayer> layers;
  for (auto& p : parts) {
    auto pl = std::move(p).release_layers();
    if (layers.empty()) {
      for (auto& l : pl) layers.push_back(std::move(l));
      continue;
    }
    AffineLayer fused = fuse(layers.back(), pl.front());
    layers.back() = std::move(fused);
    for (std::size_t i = 1; i < pl.size(); ++i) layers.push_back(std::move(pl[i]));
  }
  return Network(in, std::move(layers), mode);
}

Network pad_depth(Network f, std::size_t depth, bool nonneg) {
  if (f.depth() == depth) return f;
  if (f.depth() > depth) throw InputError("pad_depth: network already deeper than target");
  if (f.depth() == 0) {
    std::size_t k = f.output_dim();
    return compose(std::move(f), identity(k, depth, nonneg));
  }
  Mode mode = f.mode();
  std::size_t in = f.input_dim();
  std::size_t extra = depth - f.depth();
  auto layers = std::move(f).release_layers();
  AffineLayer out = std::move(layers.back());
  layers.pop_back();
  std::size_t h = layers.back().out_dim();
  for (std::size_t i = 0; i < extra; ++i) {
    AffineLayer id(h, h);
    for (std::size_t j = 0; j < h; ++j) id.add(j, j, 1);
    layers.push_back(std::move(id));
  }
  layers.push_back(std::move(out));
  return Network(in, std::move(layers), mode);
}

Network parallel(std::vector<Network> parts, const std::vector<bool>& nonneg) {
  if (parts.empty()) throw InputError("parallel: empty sequence");
  std::size_t depth = 0;
  for (const auto& p : parts) depth = std::max(depth, p.depth());
  Mode mode = Mode::Rational;
  std::vector<std::vector<AffineLayer>> pl;
  std::size_t in_total = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    mode = join(mode, parts[i].mode());
    in_total += parts[i].input_dim();
    bool nn = i < nonneg.size() && nonneg[i];
    pl.push_back(pad_depth(std::move(parts[i]), depth, nn).release_layers());
  }
  std::vector<AffineLayer> layers;
  for (std::size_t l = 0; l <= depth; ++l) {
    std::size_t in = 0, out = 0;
    for (const auto& p : pl) {
      in += p[l].in_dim;
      out += p[l].out_dim();
    }
    AffineLayer layer(out, in);
    std::size_t ro = 0, co = 0;
    for (auto& p : pl) {
      auto& src = p[l];
      std::vector<std::uint32_t> remap;
      for (const auto& v : src.pool()) remap.push_back(layer.intern(v));
      for (std::size_t r = 0; r < src.out_dim(); ++r) {
        auto& row = layer.rows[ro + r];
        row.reserve(src.rows[r].size());
        for (const auto& e : src.rows[r]) row.push_back(Entry{static_cast<std::uint32_t>(e.col + co), remap[e.id]});
        layer.bias[ro + r] = std::move(src.bias[r]);
      }
      ro += src.out_dim();
      co += src.in_dim;
      src = AffineLayer();
    }
    layers.push_back(std::move(layer));
  }
  return Network(in_total, std::move(layers), mode);
}

Network concat(std::vector<Network> parts, const std::vector<bool>& nonneg) {
  if (parts.empty()) throw InputError("concat: empty sequence");
  std::size_t d = parts.front().input_dim();
  for (const auto& p : parts)
    if (p.input_dim() != d) throw InputError("concat: input dimensions differ");
  std::size_t n = parts.size();
  AffineLayer dup(n * d, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) dup.add(i * d + j, j, 1);
  return compose(affine(std::move(dup)), parallel(std::move(parts), nonneg));
}

Network sum_parallel(std::vector<Network> parts) {
  if (parts.empty()) throw InputError("sum_parallel: empty sequence");
  std::size_t k = parts.front().output_dim();
  for (const auto& p : parts)
    if (p.output_dim() != k || p.input_dim() != parts.front().input_dim())
      throw InputError("sum_parallel: dimension mismatch");
  std::size_t n = parts.size();
  Network c = concat(std::move(parts));
  AffineLayer sum(k, n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) sum.add(j, i * k + j, 1);
  return compose(std::move(c), affine(std::move(sum)));
}

Network sum_sequential(std::vector<Network> parts) {
  if (parts.empty()) throw InputError("sum_sequential: empty sequence");
  std::size_t d = parts.front().input_dim();
  std::size_t k = parts.front().output_dim();
  for (const auto& p : parts)
    if (p.output_dim() != k || p.input_dim() != d) throw InputError("sum_sequential: dimension mismatch");
  std::size_t n = parts.size();
  if (n == 1) return std::move(parts.front());
  std::vector<Network> stages;
  for (std::size_t i = 0; i < n; ++i) {
    bool first = i == 0, last = i + 1 == n;
    std::size_t L = parts[i].depth();
    std::size_t in = first ? d : d + k;
    // route (x, S) to the branch inputs (x | x | S)
    std::size_t routed = d + (last ? 0 : d) + (first ? 0 : k);
    AffineLayer route(routed, in);
    std::size_t r = 0;
    for (std::size_t j = 0; j < d; ++j) route.add(r++, j, 1);
    if (!last)
      for (std::size_t j = 0; j < d; ++j) route.add(r++, j, 1);
    if (!first)
      for (std::size_t j = 0; j < k; ++j) route.add(r++, d + j, 1);
    std::vector<Network> branches;
    branches.push_back(std::move(parts[i]));
    if (!last) branches.push_back(identity(d, L));
    if (!first) branches.push_back(identity(k, L));
    Network body = parallel(std::move(branches));
    // (y, x, S) -> (x, S + y)
    std::size_t out = last ? k : d + k;
    AffineLayer gather(out, routed);
    if (!last)
      for (std::size_t j = 0; j < d; ++j) gather.add(j, k + j, 1);
    std::size_t off = last ? 0 : d;
    for (std::size_t j = 0; j < k; ++j) {
      gather.add(off + j, j, 1);
      if (!first) gather.add(off + j, (last ? k : k + d) + j, 1);
    }
    stages.push_back(compose_all({affine(std::move(route)), std::move(body), affine(std::move(gather))}));
  }
  return compose_all(std::move(stages));
}

Network then_affine(Network f, const std::vector<std::vector<Rational>>& weights,
                    const std::vector<Rational>& bias) {
  return compose(std::move(f), affine(weights, bias));
}

Network scale(Network f, const Rational& c) {
  Mode mode = f.mode();
  std::size_t in = f.input_dim();
  auto layers = std::move(f).release_layers();
  auto& last = layers.back();
  last.map_weights([&](const Rational& w) -> Rational { return w * c; });
  for (auto& b : last.bias) b *= c;
  return Network(in, std::move(layers), mode);
}

// ---- serialization ----------------------------------------------------------

using detail::decode_num;
using detail::encode_num;

namespace {

// Layers with more cells than this are written as a list of nonzero entries.
constexpr std::size_t kDenseCells = std::size_t{1} << 16;

void write_num(std::ostream& os, const Rational& v, Mode mode) {
  if (mode == Mode::Float)
    os << json(to_double(v)).dump();
  else
    os << '"' << to_string(v) << '"';
}

}  // namespace

void serialize(const Network& net, std::ostream& os) {
  // keys in sorted order, matching a json object dump
  const Mode mode = net.mode();
  os << "{\"input_dim\":" << net.input_dim() << ",\"layers\":[";
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    if (l) os << ',';
    os << "{\"bias\":[";
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
      if (r) os << ',';
      write_num(os, layer.bias[r], mode);
    }
    os << ']';
    if (layer.out_dim() * layer.in_dim <= kDenseCells) {
      os << ",\"weights\":[";
      for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        if (r) os << ',';
        os << '[';
        std::size_t k = 0;
        const auto& entries = layer.rows[r];
        for (std::size_t c = 0; c < layer.in_dim; ++c) {
          if (c) os << ',';
          if (k < entries.size() && entries[k].col == c)
            write_num(os, layer.weight(entries[k++]), mode);
          else
            write_num(os, Rational(0), mode);
        }
        os << ']';
      }
      os << "]}";
    } else {
      os << ",\"entries\":[";
      bool first = true;
      for (std::size_t r = 0; r < layer.out_dim(); ++r)
        for (const auto& e : layer.rows[r]) {
          if (!first) os << ',';
          first = false;
          os << '[' << r << ',' << e.col << ',';
          write_num(os, layer.weight(e), mode);
          os << ']';
        }
      os << "],\"out_dim\":" << layer.out_dim() << '}';
    }
  }
  os << "],\"mode\":\"" << detail::mode_name(mode) << "\",\"output_dim\":" << net.output_dim() << '}';
}

std::string serialize(const Network& net) {
  std::ostringstream os;
  serialize(net, os);
  return os.str();
}

Network deserialize(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed network document: ") + e.what());
  }
  try {
    Mode mode = Mode::Rational;
    if (doc.contains("mode")) mode = detail::parse_mode(doc.at("mode").get<std::string>());
    std::size_t in = doc.at("input_dim").get<std::size_t>();
    std::size_t out = doc.at("output_dim").get<std::size_t>();
    std::vector<AffineLayer> layers;
    std::size_t dim = in;
    for (const auto& jl : doc.at("layers")) {
      const auto& b = jl.at("bias");
      AffineLayer layer;
      if (jl.contains("entries")) {
        // sparse form: [[row, col, num], ...] plus out_dim
        const std::size_t rows = jl.at("out_dim").get<std::size_t>();
        if (rows != b.size()) throw InputError("bias length differs from weight row count");
        layer = AffineLayer(rows, dim);
        for (const auto& t : jl.at("entries")) {
          if (t.size() != 3) throw InputError("sparse entry must be [row, col, value]");
          layer.add(t[0].get<std::size_t>(), t[1].get<std::size_t>(), decode_num(t[2], mode));
        }
      } else {
        const auto& w = jl.at("weights");
        if (w.size() != b.size()) throw InputError("bias length differs from weight row count");
        layer = AffineLayer(w.size(), dim);
        for (std::size_t r = 0; r < w.size(); ++r) {
          if (w[r].size() != dim) throw InputError("layer dimensions do not chain");
          for (std::size_t c = 0; c < dim; ++c) layer.add(r, c, decode_num(w[r][c], mode));
        }
      }
      for (std::size_t r = 0; r < b.size(); ++r) layer.bias[r] = decode_num(b[r], mode);
      dim = layer.out_dim();
      layers.push_back(std::move(layer));
    }
    Network net(in, std::move(layers), mode);
    if (net.output_dim() != out) throw InputError("output_dim does not match last layer");
    return net;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed network document: ") + e.what());
  }
}

}  // namespace relunet::net
