// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#include "relunet/codec.hpp"

#include <algorithm>
#include <cstdlib>

#include "json_num.hpp"
#include "relunet/pwl.hpp"

namespace relunet::codec {

using net::AffineLayer;
using net::Network;

const char* regime_name(Regime r) { return r == Regime::Sparse ? "sparse" : "dense"; }

long IntVector::ell1() const {
  long s = 0;
  for (long v : x) s += std::labs(v);
  return s;
}

long IntVector::max_abs() const {
  long s = 0;
  for (long v : x) s = std::max(s, std::labs(v));
  return s;
}

namespace {

long ceil_div(long a, long b) { return (a + b - 1) / b; }

void check_params(long N, long M, long S) {
  if (N < 1) throw InputError("codec: vector must be nonempty");
  if (M < 1) throw InputError("codec: M must be >= 1");
  if (S < 1) throw InputError("codec: S must be >= 1");
}

void push_bits(std::vector<std::uint8_t>& out, unsigned long v, int width) {
  for (int b = width - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((v >> b) & 1));
}

unsigned long read_bits(const std::vector<std::uint8_t>& in, std::size_t& pos, int width) {
  unsigned long v = 0;
  for (int b = 0; b < width; ++b) v = 2 * v + in.at(pos++);
  return v;
}

void token_bits(std::vector<std::uint8_t>& out, Regime regime, const Token& tk, const CodeLayout& lay) {
  push_bits(out, static_cast<unsigned long>(tk.f), lay.f_width);
  if (regime == Regime::Sparse) {
    // 0 = 00, 1 = 10, -1 = 01
    out.push_back(tk.t == 1);
    out.push_back(tk.t == -1);
  } else {
    out.push_back(tk.t >= 0);  // sign bit, 1 = nonnegative
    push_bits(out, static_cast<unsigned long>(std::labs(tk.t)), lay.t_width - 1);
  }
}

Token read_token(const std::vector<std::uint8_t>& in, std::size_t& pos, Regime regime, int f_width,
                 int t_width) {
  Token tk;
  tk.f = static_cast<long>(read_bits(in, pos, f_width));
  if (regime == Regime::Sparse) {
    int b1 = in.at(pos++), b2 = in.at(pos++);
    if (b1 && b2) throw InputError("decode: invalid sparse value token 11");
    tk.t = b1 - b2;
  } else {
    bool nonneg = in.at(pos++);
    long mag = static_cast<long>(read_bits(in, pos, t_width - 1));
    tk.t = nonneg ? mag : -mag;
  }
  return tk;
}

// Smallest w >= 1 with w^2 * a >= b (a > 0).
long ceil_sqrt_ratio(const BigInt& b, const BigInt& a) {
  long w = 1;
  while (BigInt(w) * w * a < b) ++w;
  return w;
}

// Smallest c >= 1 with c^T * a >= b.
long ceil_root_ratio(const BigInt& b, const BigInt& a, long T) {
  long c = 1;
  while (ipow(c, static_cast<unsigned long>(T)) * a < b) ++c;
  return c;
}

}  // namespace

CodeLayout layout(long N, long M, long S) {
  check_params(N, M, S);
  CodeLayout lay;
  if (N >= M) {
    lay.regime = Regime::Sparse;
    lay.tau = S;
    lay.f_width = 1 + static_cast<int>(ceil_log2(make_rational(N, M)));
    lay.t_width = 2;
  } else {
    lay.regime = Regime::Dense;
    lay.tau = ceil_div(S * N, M);
    lay.f_width = 1;
    lay.t_width = 1 + static_cast<int>(bit_length(BigInt(ceil_div(M, N))));
  }
  return lay;
}

SparseCode encode(const IntVector& xv, long M, long S) {
  const long N = static_cast<long>(xv.size());
  check_params(N, M, S);
  if (xv.ell1() > M) throw InputError("encode: ||x||_1 exceeds M");
  if (xv.max_abs() >= S) throw InputError("encode: ||x||_inf must be below S");
  const CodeLayout lay = layout(N, M, S);

  SparseCode code;
  code.regime = lay.regime;
  code.N = N;
  code.M = M;
  code.S = S;
  code.tau = lay.tau;
  code.f_width = lay.f_width;
  code.t_width = lay.t_width;

  const auto& x = xv.x;
  if (xv.ell1() == 0) {
    code.tokens.push_back({0, 0});
  } else if (lay.regime == Regime::Sparse) {
    const long chunk = ceil_div(N, M);
    long pos = 0;
    for (long n = 1; n <= N; ++n) {
      long v = x[static_cast<std::size_t>(n - 1)];
      if (v == 0) continue;
      long gap = n - pos;
      long full = ceil_div(gap, chunk) - 1;
      for (long k = 0; k < full; ++k) code.tokens.push_back({chunk, 0});
      long rest = gap - full * chunk;
      long unit = v > 0 ? 1 : -1;
      code.tokens.push_back({rest, unit});
      for (long k = 1; k < std::labs(v); ++k) code.tokens.push_back({0, unit});
      pos = n;
    }
  } else {
    const long chunk = ceil_div(M, N);
    for (long n = 1; n <= N; ++n) {
      long v = x[static_cast<std::size_t>(n - 1)];
      long left = std::labs(v);
      long sign = v < 0 ? -1 : 1;
      long f = 1;
      do {
        long part = std::min(left, chunk);
        code.tokens.push_back({f, sign * part});
        f = 0;
        left -= part;
      } while (left > 0);
    }
  }

  std::vector<std::uint8_t> b;
  for (const auto& tk : code.tokens) token_bits(b, lay.regime, tk, lay);
  code.bits = bits::BitString{std::move(b), 0};

  // Anchors: i_k is the last token with f >= 1 at or before k*tau + 1. Such tokens
  // are never more than tau apart, so consecutive anchors differ by < 2 tau.
  const long R = static_cast<long>(code.tokens.size());
  const long rho = std::max(1L, ceil_div(R, lay.tau));
  std::vector<long> starts;
  for (long i = 1; i <= R; ++i)
    if (code.tokens[static_cast<std::size_t>(i - 1)].f >= 1) starts.push_back(i);
  code.anchors_i.push_back(1);
  for (long k = 1; k < rho; ++k) {
    auto it = std::upper_bound(starts.begin(), starts.end(), k * lay.tau + 1);
    code.anchors_i.push_back(*std::prev(it));
  }
  code.anchors_i.push_back(R + 1);
  long acc = 0;
  std::size_t next = 1;
  code.anchors_j.push_back(0);
  for (long i = 1; i <= R && next + 1 < code.anchors_i.size(); ++i) {
    if (i == code.anchors_i[next]) {
      code.anchors_j.push_back(acc);
      ++next;
    }
    acc += code.tokens[static_cast<std::size_t>(i - 1)].f;
  }
  code.anchors_j.push_back(N);
  check_anchors(code);
  return code;
}

void check_anchors(const SparseCode& code) {
  const auto& I = code.anchors_i;
  const auto& J = code.anchors_j;
  const long R = static_cast<long>(code.tokens.size());
  if (I.size() < 2 || I.size() != J.size()) throw InputError("anchors: need rho >= 1 and matching lengths");
  if (I.front() != 1 || I.back() != R + 1) throw InputError("anchors: need i_0 = 1 and i_rho = R + 1");
  if (J.front() != 0 || J.back() != code.N) throw InputError("anchors: need j_0 = 0 and j_rho = N");
  for (std::size_t k = 1; k < I.size(); ++k) {
    if (I[k] <= I[k - 1] || J[k] <= J[k - 1]) throw InputError("anchors: sequences must increase strictly");
    if (I[k] - I[k - 1] >= 2 * code.tau) throw InputError("anchors: segment longer than 2 tau - 1 tokens");
  }
}

IntVector decode_reference(const SparseCode& code) {
  if (code.N < 1) throw InputError("decode: N must be >= 1");
  if (code.f_width < 1 || code.t_width < 2) throw InputError("decode: bad token widths");
  const auto& b = code.bits.bits;
  const std::size_t per = static_cast<std::size_t>(code.block_bits());
  if (b.size() % per != 0) throw InputError("decode: bit length is not a whole number of tokens");
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while (pos < b.size()) tokens.push_back(read_token(b, pos, code.regime, code.f_width, code.t_width));
  if (!code.tokens.empty() && tokens != code.tokens) throw InputError("decode: tokens disagree with bits");

  SparseCode view = code;
  view.tokens = tokens;
  check_anchors(view);

  IntVector out;
  out.x.assign(static_cast<std::size_t>(code.N), 0);
  for (long k = 0; k < view.rho(); ++k) {
    const long lo = view.anchors_j[static_cast<std::size_t>(k)];
    const long hi = view.anchors_j[static_cast<std::size_t>(k + 1)];
    long n = lo;
    for (long i = view.anchors_i[static_cast<std::size_t>(k)]; i < view.anchors_i[static_cast<std::size_t>(k + 1)];
         ++i) {
      const Token& tk = tokens[static_cast<std::size_t>(i - 1)];
      n += tk.f;
      if (n > lo && n <= hi) out.x[static_cast<std::size_t>(n - 1)] += tk.t;
    }
  }
  return out;
}

Rational segment_code(const SparseCode& code, long k) {
  if (k < 0 || k >= code.rho()) throw InputError("segment_code: segment out of range");
  const std::size_t per = static_cast<std::size_t>(code.block_bits());
  const std::size_t from = static_cast<std::size_t>(code.anchors_i[static_cast<std::size_t>(k)] - 1) * per;
  const std::size_t to = static_cast<std::size_t>(code.anchors_i[static_cast<std::size_t>(k + 1)] - 1) * per;
  std::vector<std::uint8_t> seg(code.bits.bits.begin() + static_cast<long>(from),
                                code.bits.bits.begin() + static_cast<long>(to));
  seg.resize(static_cast<std::size_t>(2 * code.tau) * per, 0);
  return bits::fraction_value(seg);
}

namespace {

// Sampled pwl function whose breakpoint range covers [xs.front(), xs.back()]; the
// deep synthesis is exact only between the first and last breakpoints.
pwl::PwlFunc sampled(const std::vector<Rational>& xs, const std::vector<Rational>& ys) {
  auto outer = [&](bool left) -> Rational {
    if (ys.size() < 2) return Rational(0);
    const std::size_t a = left ? 0 : ys.size() - 2;
    return (ys[a + 1] - ys[a]) / (xs[a + 1] - xs[a]);
  };
  pwl::PwlFunc f = pwl::from_samples(xs, ys, outer(true), outer(false));
  if (f.breakpoints.front() != xs.front()) {
    f.breakpoints.insert(f.breakpoints.begin(), xs.front());
    f.values.insert(f.values.begin(), ys.front());
  }
  if (f.breakpoints.back() != xs.back()) {
    f.breakpoints.push_back(xs.back());
    f.values.push_back(ys.back());
  }
  return f;
}

}  // namespace

std::pair<Network, Network> staircase_nets(const SparseCode& code, long W1, long L1) {
  check_anchors(code);
  if (W1 < 1 || L1 < 1) throw InputError("staircase_nets: W1 and L1 must be positive");
  if (BigInt(W1) * W1 * L1 * code.S < code.M) throw InputError("staircase_nets: need W1^2 L1 >= M / S");
  std::vector<Rational> xs, js, rs;
  // J is n - j_k and R is constant on each segment, so the first and last n of
  // every segment determine the interpolant through all integer samples
  std::vector<long> ns{1, code.N};
  for (long k = 0; k < code.rho(); ++k) {
    const long lo = code.anchors_j[static_cast<std::size_t>(k)] + 1;
    const long hi = code.anchors_j[static_cast<std::size_t>(k + 1)];
    if (lo > hi) continue;
    ns.push_back(lo);
    ns.push_back(hi);
  }
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  std::vector<Rational> seg;
  for (long k = 0; k < code.rho(); ++k) seg.push_back(segment_code(code, k));
  long k = 0;
  for (long n : ns) {
    while (n > code.anchors_j[static_cast<std::size_t>(k + 1)]) ++k;
    xs.push_back(Rational(n));
    js.push_back(Rational(n - code.anchors_j[static_cast<std::size_t>(k)]));
    rs.push_back(seg[static_cast<std::size_t>(k)]);
  }
  net::SizeBudget budget{static_cast<std::size_t>(W1), static_cast<std::size_t>(L1)};
  return {pwl::synth_deep(sampled(xs, js), budget), pwl::synth_deep(sampled(xs, rs), budget)};
}

namespace {

Network delta_channel() {
  // w -> (w, h(w)), depth 1, width 5
  return net::concat({net::identity(1, 1), bits::delta_net()});
}

// Last layer: (w, a, x1, x2, r, Sigma) channels given by index list -> (w, r, Sigma + value)
// where value = relu(p1) - relu(p2) and p1, p2 are affine in the inputs.
Network finish_layer(std::size_t in_dim, std::size_t w, std::size_t r, std::size_t s,
                     const std::vector<std::pair<std::size_t, Rational>>& p1, const Rational& c1,
                     const std::vector<std::pair<std::size_t, Rational>>& p2, const Rational& c2) {
  // hidden: relu(w), relu(-w), relu(r), relu(S), relu(-S), relu(p1), relu(p2)
  AffineLayer h(7, in_dim);
  h.add(0, w, Rational(1));
  h.add(1, w, Rational(-1));
  h.add(2, r, Rational(1));
  h.add(3, s, Rational(1));
  h.add(4, s, Rational(-1));
  for (const auto& [c, v] : p1) h.add(5, c, v);
  h.bias[5] = c1;
  for (const auto& [c, v] : p2) h.add(6, c, v);
  h.bias[6] = c2;
  AffineLayer out(3, 7);
  out.add(0, 0, Rational(1));
  out.add(0, 1, Rational(-1));
  out.add(1, 2, Rational(1));
  out.add(2, 3, Rational(1));
  out.add(2, 4, Rational(-1));
  out.add(2, 5, Rational(1));
  out.add(2, 6, Rational(-1));
  std::vector<AffineLayer> layers;
  layers.push_back(std::move(h));
  layers.push_back(std::move(out));
  return Network(in_dim, std::move(layers));
}

}  // namespace

Network block_step_net(Regime regime, int f_width, int t_width, long tau, long T) {
  if (T < 1 || tau < 1 || f_width < 1 || t_width < 2) throw InputError("block_step_net: bad parameters");
  const int nbits = static_cast<int>(2 * tau * (f_width + t_width));
  if (regime == Regime::Sparse) {
    // (z, r, S) -> (z - f1, r1, S): f1 read by the stream extractor over <= T layers
    Network s1 = net::parallel({net::identity(1, 0), bits::extract_stream_exclusive(nbits, f_width, static_cast<int>(T)),
                                net::identity(1, 0)});
    s1 = net::then_affine(std::move(s1), {{1, -1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}, {0, 0, 0});
    // (w, r1, S) -> (w, h(w), b1, b2, r2, S)
    Network s2 = net::parallel({delta_channel(), bits::extract_heads(nbits, 2), net::identity(1, 1)});
    // at_1 = relu(a + b1 - 1) - relu(a + b2 - 1)
    Network s3 = finish_layer(6, 0, 4, 5, {{1, Rational(1)}, {2, Rational(1)}}, Rational(-1),
                              {{1, Rational(1)}, {3, Rational(1)}}, Rational(-1));
    return net::compose_all({std::move(s1), std::move(s2), std::move(s3)});
  }
  const int beta = t_width - 1;
  // (z, r, S) -> (w = z - f1, b0, r1, S)
  Network d1 = net::parallel({net::identity(1, 1), bits::extract_heads(nbits, 2), net::identity(1, 1)});
  d1 = net::then_affine(std::move(d1), {{1, -1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 1, 0}, {0, 0, 0, 0, 1}},
                        {0, 0, 0, 0});
  // (w, b0, r1, S) -> (w, a, b0, |t|, r2, S)
  Network d2 = net::parallel({delta_channel(), net::identity(1, 0), bits::extract_stream_exclusive(nbits, beta, static_cast<int>(T)),
                              net::identity(1, 0)},
                             {false, true, true, false});
  // at_1 = relu(|t| - 2^beta (2 - a - b0)) - relu(|t| - 2^beta (1 - a + b0))
  const Rational P(BigInt(1) << beta);
  Network d3 = finish_layer(6, 0, 4, 5, {{3, Rational(1)}, {1, P}, {2, P}}, -2 * P,
                            {{3, Rational(1)}, {1, P}, {2, -P}}, -P);
  return net::compose_all({std::move(d1), std::move(d2), std::move(d3)});
}

RepPlan rep_plan(long N, long M, long S_in, long T) {
  check_params(N, M, S_in);
  if (T < 1) throw InputError("rep_net: T must be >= 1");
  RepPlan plan;
  plan.S = std::min(S_in, M);
  const long S = plan.S;
  const CodeLayout lay = layout(N, M, S);
  plan.regime = lay.regime;
  plan.tau = lay.tau;
  plan.L1 = lay.tau * (T + 2);
  if (lay.regime == Regime::Sparse) {
    plan.W1 = ceil_sqrt_ratio(BigInt(M), BigInt(S) * S * (T + 2));
    long q = ceil_root_ratio(BigInt(N), BigInt(M), T);
    plan.bound.width = static_cast<std::size_t>(22 * std::max(plan.W1, q) + 10);
    plan.bound.depth = static_cast<std::size_t>(4 * S * (T + 2));
  } else {
    plan.W1 = ceil_sqrt_ratio(BigInt(M) * M, BigInt(S) * S * N * (T + 2));
    long q = ceil_root_ratio(BigInt(M), BigInt(N), T);
    plan.bound.width = static_cast<std::size_t>(22 * std::max(plan.W1, q) + 12);
    plan.bound.depth = static_cast<std::size_t>(4 * lay.tau * (T + 2));
  }
  return plan;
}

// x = u + v with u the entries of size >= S (support <= M/S), realized by
// pwl synthesis, and v decoded from its code by 2 tau chained block steps.
Network rep_net(const IntVector& xv, long M, long S_in, long T) {
  const long N = static_cast<long>(xv.size());
  const RepPlan plan = rep_plan(N, M, S_in, T);
  if (xv.ell1() > M) throw InputError("rep_net: ||x||_1 exceeds M");
  const long S = plan.S;

  IntVector u, v;
  u.x.assign(xv.x.size(), 0);
  v.x.assign(xv.x.size(), 0);
  bool any_u = false;
  for (std::size_t n = 0; n < xv.x.size(); ++n) {
    if (std::labs(xv.x[n]) >= S) {
      u.x[n] = xv.x[n];
      any_u = true;
    } else {
      v.x[n] = xv.x[n];
    }
  }
  const SparseCode code = encode(v, M, S);
  const net::SizeBudget budget{static_cast<std::size_t>(plan.W1), static_cast<std::size_t>(plan.L1)};

  auto [Jn, Rn] = staircase_nets(code, plan.W1, plan.L1);
  std::vector<Network> front{std::move(Jn), std::move(Rn)};
  if (any_u) {
    // zero between samples, so only the neighbourhoods of nonzero entries matter
    std::vector<long> ns{1, N};
    for (long n = 1; n <= N; ++n) {
      if (u.x[static_cast<std::size_t>(n - 1)] == 0) continue;
      for (long t = std::max(1L, n - 1); t <= std::min(N, n + 1); ++t) ns.push_back(t);
    }
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    std::vector<Rational> xs, ys;
    for (long n : ns) {
      xs.push_back(Rational(n));
      ys.push_back(Rational(u.x[static_cast<std::size_t>(n - 1)]));
    }
    front.push_back(pwl::synth_deep(sampled(xs, ys), budget));
  }
  const std::size_t k = front.size();  // 2 or 3
  Network phase1 = net::concat(std::move(front));
  // (J, R[, u]) -> (z, r, Sigma = 0[, u])
  std::vector<std::vector<Rational>> route(k + 1, std::vector<Rational>(k, Rational(0)));
  route[0][0] = 1;
  route[1][1] = 1;
  if (any_u) route[3][2] = 1;
  std::vector<Network> chain;
  chain.push_back(net::then_affine(std::move(phase1), route, std::vector<Rational>(k + 1, Rational(0))));

  Network step = block_step_net(code.regime, code.f_width, code.t_width, code.tau, T);
  if (any_u) step = net::parallel({step, net::identity(1, step.depth())});
  for (long i = 0; i < 2 * code.tau; ++i) chain.push_back(step);
  std::vector<std::vector<Rational>> out(1, std::vector<Rational>(k + 1, Rational(0)));
  out[0][2] = 1;
  if (any_u) out[0][3] = 1;
  chain.push_back(net::affine(out, {Rational(0)}));
  Network g = net::compose_all(std::move(chain));

  if (g.width() > plan.bound.width || g.depth() > plan.bound.depth)
    throw std::logic_error("rep_net: size exceeds the representation bound");
  return g;
}

// ---- JSON -------------------------------------------------------------------

std::string to_json(const SparseCode& code) {
  detail::json doc;
  doc["regime"] = regime_name(code.regime);
  detail::json toks = detail::json::array();
  for (const auto& t : code.tokens) toks.push_back({t.f, t.t});
  doc["tokens"] = std::move(toks);
  std::string raw = "0.";
  for (auto b : code.bits.bits) raw.push_back(static_cast<char>('0' + b));
  doc["bits"] = raw;
  doc["i"] = code.anchors_i;
  doc["j"] = code.anchors_j;
  doc["N"] = code.N;
  doc["M"] = code.M;
  doc["S"] = code.S;
  doc["tau"] = code.tau;
  doc["f_width"] = code.f_width;
  doc["t_width"] = code.t_width;
  return doc.dump();
}

SparseCode code_from_json(const std::string& text) {
  try {
    auto doc = detail::json::parse(text);
    SparseCode code;
    const auto regime = doc.at("regime").get<std::string>();
    if (regime == "sparse")
      code.regime = Regime::Sparse;
    else if (regime == "dense")
      code.regime = Regime::Dense;
    else
      throw InputError("unknown regime '" + regime + "'");
    for (const auto& t : doc.value("tokens", detail::json::array()))
      code.tokens.push_back({t.at(0).get<long>(), t.at(1).get<long>()});
    std::string raw = doc.at("bits").get<std::string>();
    if (raw.rfind("0.", 0) == 0) raw.erase(0, 2);
    for (char c : raw) {
      if (c != '0' && c != '1') throw InputError("malformed code document: bits must be 0/1");
      code.bits.bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    code.anchors_i = doc.at("i").get<std::vector<long>>();
    code.anchors_j = doc.at("j").get<std::vector<long>>();
    code.N = doc.at("N").get<long>();
    code.M = doc.value("M", 0L);
    code.S = doc.value("S", 0L);
    code.tau = doc.at("tau").get<long>();
    code.f_width = doc.at("f_width").get<int>();
    code.t_width = doc.at("t_width").get<int>();
    return code;
  } catch (const detail::json::exception& e) {
    throw InputError(std::string("malformed code document: ") + e.what());
  }
}

}  // namespace relunet::codec
