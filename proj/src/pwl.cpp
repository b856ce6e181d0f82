// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
#include "relunet/pwl.hpp"

#include <algorithm>

#include "json_num.hpp"

namespace relunet::pwl {

using net::AffineLayer;
using net::Network;

void PwlFunc::validate() const {
  if (breakpoints.empty()) throw InputError("PwlFunc needs at least one breakpoint");
  if (breakpoints.size() != values.size())
    throw InputError("PwlFunc: breakpoints and values differ in length");
  for (std::size_t i = 1; i < breakpoints.size(); ++i)
    if (!(breakpoints[i - 1] < breakpoints[i]))
      throw InputError("PwlFunc: breakpoints must be strictly increasing");
}

Rational slope_after(const PwlFunc& f, std::size_t i) {
  if (i + 1 >= f.breakpoints.size()) return f.right_slope;
  return (f.values[i + 1] - f.values[i]) / (f.breakpoints[i + 1] - f.breakpoints[i]);
}

Rational pwl_eval(const PwlFunc& f, const Rational& t) {
  const auto& bp = f.breakpoints;
  if (t <= bp.front()) return f.values.front() + f.left_slope * (t - bp.front());
  if (t >= bp.back()) return f.values.back() + f.right_slope * (t - bp.back());
  auto it = std::upper_bound(bp.begin(), bp.end(), t);
  std::size_t i = static_cast<std::size_t>(it - bp.begin()) - 1;
  return f.values[i] + slope_after(f, i) * (t - bp[i]);
}

PwlFunc simplify(const PwlFunc& f) {
  f.validate();
  PwlFunc out;
  out.left_slope = f.left_slope;
  out.right_slope = f.right_slope;
  Rational before = f.left_slope;
  for (std::size_t i = 0; i < f.breakpoints.size(); ++i) {
    Rational after = slope_after(f, i);
    if (after != before) {
      out.breakpoints.push_back(f.breakpoints[i]);
      out.values.push_back(f.values[i]);
    }
    before = after;
  }
  if (out.breakpoints.empty()) {
    out.breakpoints.push_back(f.breakpoints.front());
    out.values.push_back(f.values.front());
  }
  return out;
}

PwlFunc from_samples(std::vector<Rational> xs, std::vector<Rational> ys, const Rational& left_slope,
                     const Rational& right_slope) {
  PwlFunc f{std::move(xs), std::move(ys), left_slope, right_slope};
  return simplify(f);
}

bool is_affine(const PwlFunc& f) {
  Rational before = f.left_slope;
  for (std::size_t i = 0; i < f.breakpoints.size(); ++i)
    if (slope_after(f, i) != before) return false;
  return true;
}

std::vector<Rational> interior_probe_points(const PwlFunc& f) {
  std::vector<Rational> pts;
  const auto& bp = f.breakpoints;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    pts.push_back(bp[i]);
    if (i + 1 < bp.size()) pts.push_back((bp[i] + bp[i + 1]) / 2);
  }
  return pts;
}

std::vector<Rational> probe_points(const PwlFunc& f) {
  auto pts = interior_probe_points(f);
  pts.insert(pts.begin(), f.breakpoints.front() - 1);
  pts.push_back(f.breakpoints.back() + 1);
  return pts;
}

bool equal(const PwlFunc& f, const PwlFunc& g) {
  auto pts = probe_points(f);
  auto more = probe_points(g);
  pts.insert(pts.end(), more.begin(), more.end());
  for (const auto& t : pts)
    if (pwl_eval(f, t) != pwl_eval(g, t)) return false;
  return true;
}

bool agrees(const Network& g, const PwlFunc& f, const std::vector<Rational>& points) {
  if (g.input_dim() != 1 || g.output_dim() != 1) throw InputError("agrees: expected a 1 -> 1 network");
  for (const auto& t : points)
    if (net::evaluate(g, std::vector<Rational>{t})[0] != pwl_eval(f, t)) return false;
  return true;
}

namespace {

Network affine_1d(const Rational& slope, const Rational& intercept) {
  AffineLayer layer(1, 1);
  layer.add(0, 0, slope);
  layer.bias[0] = intercept;
  return net::affine(std::move(layer));
}

// Coefficients of y(t) = c + sum_j w_j relu(t - knots[j]), valid for t >= knots[0],
// for the continuous function that is linear between knots, takes `vals` at the
// knots and continues with `end_slope` after the last one.
struct KnotCombo {
  Rational c;
  std::vector<Rational> w;
};

KnotCombo through_knots(const std::vector<Rational>& knots, const std::vector<Rational>& vals,
                        const Rational& end_slope) {
  KnotCombo out;
  out.c = vals[0];
  out.w.resize(knots.size());
  Rational prev(0);
  for (std::size_t j = 0; j < knots.size(); ++j) {
    Rational s = j + 1 < knots.size() ? (vals[j + 1] - vals[j]) / (knots[j + 1] - knots[j]) : end_slope;
    out.w[j] = s - prev;
    prev = s;
  }
  return out;
}

Rational relu(const Rational& v) { return v > 0 ? v : Rational(0); }

struct Kink {
  Rational at;
  Rational jump;  // slope change
};

}  // namespace

Network synth_shallow(const PwlFunc& input) {
  PwlFunc f = simplify(input);
  const auto& bp = f.breakpoints;
  if (is_affine(f)) return affine_1d(f.left_slope, f.values[0] - f.left_slope * bp[0]);

  // f(t) = f(t_1) - a_0 relu(t_1 - t) + sum_i a_i relu(t - t_i)
  std::vector<std::pair<Rational, Rational>> up;  // (t_i, a_i)
  Rational before(0);
  for (std::size_t i = 0; i < bp.size(); ++i) {
    Rational after = slope_after(f, i);
    if (after != before) up.emplace_back(bp[i], after - before);
    before = after;
  }
  bool left = sgn(f.left_slope) != 0;
  std::size_t width = up.size() + (left ? 1 : 0);
  AffineLayer hidden(width, 1);
  AffineLayer out(1, width);
  std::size_t k = 0;
  if (left) {
    hidden.add(k, 0, Rational(-1));
    hidden.bias[k] = bp[0];
    out.add(0, k, -f.left_slope);
    ++k;
  }
  for (const auto& [t, a] : up) {
    hidden.add(k, 0, Rational(1));
    hidden.bias[k] = -t;
    out.add(0, k, a);
    ++k;
  }
  out.bias[0] = f.values[0];
  std::vector<AffineLayer> layers;
  layers.push_back(std::move(hidden));
  layers.push_back(std::move(out));
  return Network(1, std::move(layers));
}

// Deep realization on [lo, hi] = [t_1, t_m].
//
// The kinks strictly inside (lo, hi) are split into groups holding at most 3W
// kinks of each sign, and runs of at most 3W+1 consecutive groups form blocks.
// A block is two hidden layers:
//   layer A: relu(t - k_j) at knots k_0 = lo and two knots in every gap between
//            consecutive groups, plus the carried running sum;
//   layer B: one neuron per kink slot, relu(y(t)), where y is linear on each
//            group's work interval and equals +-|jump| (t - kink) there, or 0 if
//            the slot is unused in that group. Crossing directions alternate over
//            the groups using the slot, so the sign of y never flips inside a gap
//            interval. A compensation neuron relu(Q + c(t) + B) absorbs every
//            spurious kink at the knots, and one neuron carries u = t - lo.
// The running sum travels as Q = partial + C >= 0, shifted by a global C.
Network synth_deep(const PwlFunc& input, net::SizeBudget budget) {
  input.validate();
  if (budget.width < 1 || budget.depth < 1) throw InputError("synth_deep: budget must be positive");
  BigInt capacity = BigInt(6) * budget.width * budget.width * budget.depth;
  if (BigInt(static_cast<unsigned long>(input.pieces())) > capacity)
    throw InputError("synth_deep: piece budget exceeded (" + std::to_string(input.pieces()) + " > " +
                     capacity.get_str() + ")");

  const Rational lo = input.breakpoints.front();
  const Rational hi = input.breakpoints.back();
  PwlFunc f = simplify(input);
  std::vector<Kink> kinks;
  {
    Rational before = f.left_slope;
    for (std::size_t i = 0; i < f.breakpoints.size(); ++i) {
      Rational after = slope_after(f, i);
      if (f.breakpoints[i] > lo && f.breakpoints[i] < hi) kinks.push_back({f.breakpoints[i], after - before});
      before = after;
    }
  }
  if (is_affine(f)) return synth_shallow(f);
  const Rational f_lo = pwl_eval(f, lo);
  if (kinks.empty()) {
    Rational s = lo == hi ? Rational(0) : (pwl_eval(f, hi) - f_lo) / (hi - lo);
    return affine_1d(s, f_lo - s * lo);
  }
  const Rational base_slope = (pwl_eval(f, kinks[0].at) - f_lo) / (kinks[0].at - lo);

  const std::size_t per_sign = 3 * budget.width;
  const std::size_t max_groups = 3 * budget.width + 1;

  // groups[g] = [begin, end) into kinks
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  {
    std::size_t begin = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < kinks.size(); ++i) {
      bool positive = kinks[i].jump > 0;
      if ((positive ? pos : neg) == per_sign) {
        groups.emplace_back(begin, i);
        begin = i;
        pos = neg = 0;
      }
      (positive ? pos : neg)++;
    }
    groups.emplace_back(begin, kinks.size());
  }
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> blocks;
  for (std::size_t g = 0; g < groups.size(); g += max_groups)
    blocks.emplace_back(groups.begin() + static_cast<long>(g),
                        groups.begin() + static_cast<long>(std::min(groups.size(), g + max_groups)));
  if (blocks.size() > budget.depth) throw std::logic_error("synth_deep: block count exceeds depth budget");

  // C makes every running sum nonnegative on [lo, hi]. Running sum after block
  // l equals f up to that block's last kink and is linear afterwards.
  Rational lowest = f_lo;
  for (const auto& k : kinks) lowest = std::min(lowest, pwl_eval(f, k.at));
  lowest = std::min(lowest, pwl_eval(f, hi));
  for (const auto& block : blocks) {
    std::size_t last = block.back().second - 1;
    const Rational& b = kinks[last].at;
    Rational s = slope_after(f, static_cast<std::size_t>(
                                    std::lower_bound(f.breakpoints.begin(), f.breakpoints.end(), b) -
                                    f.breakpoints.begin()));
    lowest = std::min(lowest, Rational(pwl_eval(f, b) + s * (hi - b)));
  }
  const Rational C = lowest < 0 ? Rational(-lowest) : Rational(0);

  std::vector<AffineLayer> layers;
  // Affine expressions over the previous hidden layer giving u and Q (block > 0).
  std::vector<net::Term> u_expr, q_expr;
  Rational q_bias(0);
  std::size_t prev_dim = 1;

  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& block = blocks[l];
    const bool first = l == 0;
    const bool last_block = l + 1 == blocks.size();
    const std::size_t G = block.size();

    std::vector<Rational> knots{lo};
    for (std::size_t g = 0; g + 1 < G; ++g) {
      const Rational& a = kinks[block[g].second - 1].at;
      const Rational& b = kinks[block[g + 1].first].at;
      knots.push_back(a + (b - a) / 3);
      knots.push_back(a + 2 * (b - a) / 3);
    }
    const std::size_t nk = knots.size();
    // work interval g spans knots[2g] .. knots[2g+1] (the last one is unbounded)

    // ---- layer A
    const std::size_t q_col = nk;
    const std::size_t dimA = nk + (first ? 0 : 1);
    AffineLayer A(dimA, prev_dim);
    for (std::size_t j = 0; j < nk; ++j) {
      if (first) {
        A.add(j, 0, Rational(1));
        A.bias[j] = -knots[j];
      } else {
        for (const auto& e : u_expr) A.add(j, e.col, e.value);
        A.bias[j] = lo - knots[j];
      }
    }
    if (!first) {
      for (const auto& e : q_expr) A.add(q_col, e.col, e.value);
      A.bias[q_col] = q_bias;
    }

    // ---- layer B: slots
    struct Slot {
      Rational out;  // +1 or -1
      KnotCombo y;
      std::vector<Rational> knot_vals;
      Rational end_val;  // value of y at `probe`
    };
    std::vector<Slot> slots;
    const Rational probe = Rational(std::max(knots.back(), kinks[block.back().second - 1].at) + 1);
    for (int sign : {1, -1}) {
      for (std::size_t k = 0; k < per_sign; ++k) {
        // the k-th kink of this sign in each group, if any
        std::vector<const Kink*> used(G, nullptr);
        bool any = false;
        for (std::size_t g = 0; g < G; ++g) {
          std::size_t seen = 0;
          for (std::size_t i = block[g].first; i < block[g].second; ++i) {
            if ((kinks[i].jump > 0) != (sign > 0)) continue;
            if (seen++ == k) {
              used[g] = &kinks[i];
              any = true;
              break;
            }
          }
        }
        if (!any) break;
        std::vector<Rational> vals(nk);
        int dir = 1;
        Rational end_slope(0);
        Rational end_val(0);
        for (std::size_t g = 0; g < G; ++g) {
          Rational s(0), at(0);
          if (used[g]) {
            s = dir * abs(used[g]->jump);
            at = used[g]->at;
            dir = -dir;
          }
          auto line = [&](const Rational& t) -> Rational { return s * (t - at); };
          vals[2 * g] = line(knots[2 * g]);
          if (2 * g + 1 < nk) vals[2 * g + 1] = line(knots[2 * g + 1]);
          if (g + 1 == G) {
            end_slope = s;
            end_val = line(probe);
          }
        }
        Slot slot;
        slot.out = Rational(sign);
        slot.y = through_knots(knots, vals, end_slope);
        slot.knot_vals = std::move(vals);
        slot.end_val = end_val;
        slots.push_back(std::move(slot));
      }
    }

    // Block target: F(t) = [first: base affine] + sum of the block's kinks.
    auto target = [&](const Rational& t) {
      Rational v = first ? f_lo + base_slope * (t - lo) : Rational(0);
      for (std::size_t g = 0; g < G; ++g)
        for (std::size_t i = block[g].first; i < block[g].second; ++i)
          if (kinks[i].at < t) v += kinks[i].jump * (t - kinks[i].at);
      return v;
    };
    auto slots_at_knot = [&](std::size_t j) {
      Rational v(0);
      for (const auto& s : slots) v += s.out * relu(s.knot_vals[j]);
      return v;
    };
    std::vector<Rational> comp_vals(nk);
    for (std::size_t j = 0; j < nk; ++j) comp_vals[j] = target(knots[j]) - slots_at_knot(j);
    Rational comp_probe = target(probe);
    for (const auto& s : slots) comp_probe -= s.out * relu(s.end_val);
    const Rational comp_end_slope = (comp_probe - comp_vals.back()) / (probe - knots.back());
    KnotCombo comp = through_knots(knots, comp_vals, comp_end_slope);
    Rational comp_min = comp_vals.back() + comp_end_slope * (hi - knots.back());
    for (const auto& v : comp_vals) comp_min = std::min(comp_min, v);
    const Rational shift = comp_min < 0 ? Rational(-comp_min) : Rational(0);

    const std::size_t comp_row = slots.size();
    const std::size_t u_row = comp_row + 1;
    const std::size_t dimB = slots.size() + 1 + (last_block ? 0 : 1);
    AffineLayer B(dimB, dimA);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      for (std::size_t j = 0; j < nk; ++j) B.add(k, j, slots[k].y.w[j]);
      B.bias[k] = slots[k].y.c;
    }
    for (std::size_t j = 0; j < nk; ++j) B.add(comp_row, j, comp.w[j]);
    B.bias[comp_row] = comp.c + shift + (first ? C : Rational(0));
    if (!first) B.add(comp_row, q_col, Rational(1));
    if (!last_block) B.add(u_row, 0, Rational(1));

    layers.push_back(std::move(A));
    layers.push_back(std::move(B));

    // Q_l = sum_k out_k relu(y_k) + relu(comp) - shift
    q_expr.clear();
    for (std::size_t k = 0; k < slots.size(); ++k)
      q_expr.push_back({static_cast<std::uint32_t>(k), slots[k].out});
    q_expr.push_back({static_cast<std::uint32_t>(comp_row), Rational(1)});
    q_bias = -shift;
    u_expr = {{static_cast<std::uint32_t>(u_row), Rational(1)}};
    prev_dim = dimB;
  }

  AffineLayer out(1, prev_dim);
  for (const auto& e : q_expr) out.add(0, e.col, e.value);
  out.bias[0] = q_bias - C;
  layers.push_back(std::move(out));
  return Network(1, std::move(layers));
}

// ---- JSON -------------------------------------------------------------------

std::string to_json(const PwlFunc& f, net::Mode mode) {
  using detail::encode_num;
  detail::json doc;
  doc["breakpoints"] = detail::json::array();
  doc["values"] = detail::json::array();
  for (const auto& v : f.breakpoints) doc["breakpoints"].push_back(encode_num(v, mode));
  for (const auto& v : f.values) doc["values"].push_back(encode_num(v, mode));
  doc["left_slope"] = encode_num(f.left_slope, mode);
  doc["right_slope"] = encode_num(f.right_slope, mode);
  return doc.dump();
}

PwlFunc pwl_from_json(const std::string& text) {
  using detail::decode_num;
  try {
    auto doc = detail::json::parse(text);
    // Numbers are accepted in either encoding.
    auto num = [](const detail::json& j) {
      return j.is_number_float() ? from_double(j.get<double>()) : decode_num(j, net::Mode::Rational);
    };
    PwlFunc f;
    for (const auto& v : doc.at("breakpoints")) f.breakpoints.push_back(num(v));
    for (const auto& v : doc.at("values")) f.values.push_back(num(v));
    f.left_slope = num(doc.at("left_slope"));
    f.right_slope = num(doc.at("right_slope"));
    f.validate();
    return f;
  } catch (const detail::json::exception& e) {
    throw InputError(std::string("malformed PwlFunc document: ") + e.what());
  }
}

}  // namespace relunet::pwl
