// Copyright (C) 2026 relunet authors
// SPDX-License-Identifier: Apache-2.0
// relunet command-line front end.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "criteria.hpp"
#include "json.hpp"
#include "relunet/codec.hpp"
#include "relunet/poly.hpp"
#include "relunet/pwl.hpp"
#include "relunet/sobolev.hpp"

namespace {

using namespace relunet;
using json = nlohmann::json;
namespace fs = std::filesystem;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "p/q" and integers are exact; anything else goes through binary64.
Rational parse_number(const std::string& text) {
  const bool exact = text.find_first_of(".eE") == std::string::npos;
  if (exact) return parse_rational(text);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InputError("not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw InputError("not a number: '" + text + "'");
  return from_double(v);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, sep)) {
    const auto a = cur.find_first_not_of(" \t");
    const auto b = cur.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(cur.substr(a, b - a + 1));
  }
  return out;
}

std::vector<Rational> number_list(const std::string& text) {
  std::string t = text;
  if (!t.empty() && t.front() == '[') t = t.substr(1);
  if (!t.empty() && t.back() == ']') t.pop_back();
  std::vector<Rational> out;
  for (const auto& item : split(t, ',')) out.push_back(parse_number(item));
  return out;
}

codec::IntVector int_vector(const std::string& text) {
  codec::IntVector v;
  for (const auto& r : number_list(text)) {
    if (r.get_den() != 1) throw InputError("vector entries must be integers");
    v.x.push_back(to_long(r.get_num()));
  }
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Writes next to the target and renames, so readers never see a partial file.
void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& fill) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    fill(out);
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename to '" + path + "': " + ec.message());
}

struct Common {
  std::string mode;
  std::string out;
  unsigned long seed = 1;
};

net::Mode mode_or(const Common& c, net::Mode fallback) {
  if (c.mode.empty()) return fallback;
  if (c.mode == "rational") return net::Mode::Rational;
  if (c.mode == "float") return net::Mode::Float;
  throw InputError("--mode must be rational or float");
}

std::string mode_str(net::Mode m) { return m == net::Mode::Float ? "float" : "rational"; }

// Artifact to --out (summary on stdout) or to stdout (summary on stderr).
void emit(const Common& c, const std::function<void(std::ostream&)>& artifact, const std::string& summary) {
  if (c.out.empty()) {
    artifact(std::cout);
    std::cout << '\n';
    std::cerr << summary << '\n';
  } else {
    write_atomic(c.out, artifact);
    std::cout << summary << " -> " << c.out << '\n';
  }
}

void emit_net(const Common& c, net::Network g, const std::string& verb, const std::string& extra) {
  const net::Mode mode = mode_or(c, net::Mode::Rational);
  if (mode == net::Mode::Float) g = net::lower(g);
  std::ostringstream s;
  s << verb << ": W=" << g.width() << " L=" << g.depth() << " nnz=" << g.nnz() << " mode=" << mode_str(mode) << extra;
  emit(c, [&](std::ostream& os) { net::serialize(g, os); }, s.str());
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--mode", c.mode, "rational|float");
  sub->add_option("--out", c.out, "output path (stdout when omitted)");
  sub->add_option("--seed", c.seed, "seed for randomized estimators");
}

sobolev::TargetFunction load_target(const std::string& target, long d, const std::string& s, const std::string& q,
                                    bool normalize, sobolev::Exponent* p_out) {
  if (fs::exists(target)) return sobolev::target_from_json(read_file(target), p_out);
  const Rational sv = parse_number(s);
  const auto qv = sobolev::Exponent::parse(q);
  double scale = 1;
  if (normalize) scale = sobolev::make_target(target, d, sv, qv).declared_norm;
  return sobolev::make_target(target, d, sv, qv, scale);
}

std::string errors_json(const std::string& kind, const std::string& message) {
  return json{{"error", kind}, {"message", message}}.dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relunet: exact ReLU network constructions"};
  app.require_subcommand(1);
  Common common;

  // synth-pwl
  auto* pwl_cmd = app.add_subcommand("synth-pwl", "piecewise-linear function -> network");
  std::string pwl_in, pwl_bp, pwl_vals, pwl_ls = "0", pwl_rs = "0";
  long pwl_W = 0, pwl_L = 0;
  pwl_cmd->add_option("--in", pwl_in, "PwlFunc JSON document");
  pwl_cmd->add_option("--breakpoints", pwl_bp, "comma list");
  pwl_cmd->add_option("--values", pwl_vals, "comma list");
  pwl_cmd->add_option("--left-slope", pwl_ls);
  pwl_cmd->add_option("--right-slope", pwl_rs);
  pwl_cmd->add_option("--W", pwl_W, "deep synthesis width parameter");
  pwl_cmd->add_option("--L", pwl_L, "deep synthesis depth parameter");
  add_common(pwl_cmd, common);

  // synth-vec
  auto* vec_cmd = app.add_subcommand("synth-vec", "integer vector -> network g(n) = x_n");
  std::string vec_x, vec_in;
  long vec_M = -1, vec_S = 1, vec_T = 1;
  vec_cmd->add_option("--x", vec_x, "vector, e.g. \"[0,0,-2,0,1]\"");
  vec_cmd->add_option("--in", vec_in, "vector document {\"x\": [...], \"M\": int}");
  vec_cmd->add_option("--M", vec_M, "l1 budget (default ||x||_1, at least 1)");
  vec_cmd->add_option("--S", vec_S, "width/depth trade-off S");
  vec_cmd->add_option("--T", vec_T, "depth parameter T");
  add_common(vec_cmd, common);

  // synth-poly
  auto* poly_cmd = app.add_subcommand("synth-poly", "piecewise polynomial -> network");
  std::string poly_in, poly_delta = "4", poly_p = "inf", poly_q = "inf", poly_eps;
  long poly_S = 1, poly_T = 1, poly_W0 = 1, poly_L0 = 1;
  poly_cmd->add_option("--in", poly_in, "PiecewisePoly JSON document")->required();
  poly_cmd->add_option("--delta", poly_delta, "discretization exponent");
  poly_cmd->add_option("--S", poly_S);
  poly_cmd->add_option("--T", poly_T);
  poly_cmd->add_option("--W0", poly_W0);
  poly_cmd->add_option("--L0", poly_L0);
  poly_cmd->add_option("--p", poly_p);
  poly_cmd->add_option("--q", poly_q);
  poly_cmd->add_option("--eps", poly_eps, "trifling width (default b^-ell / 4)");
  add_common(poly_cmd, common);

  // synth-sobolev
  auto* sob_cmd = app.add_subcommand("synth-sobolev", "Sobolev target -> network");
  std::string sob_target = "sin", sob_s = "2", sob_q = "inf", sob_p, sob_eps;
  long sob_d = 1, sob_m = 0, sob_n = 0, sob_base = 0, sob_alpha = 1, sob_beta = 1, sob_points = 0;
  bool sob_normalize = false;
  sob_cmd->add_option("--target", sob_target, "preset id or target JSON file");
  sob_cmd->add_option("--d", sob_d);
  sob_cmd->add_option("--s", sob_s);
  sob_cmd->add_option("--q", sob_q);
  sob_cmd->add_option("--p", sob_p, "error norm (default q)");
  sob_cmd->add_option("--m", sob_m, "full assembly width parameter");
  sob_cmd->add_option("--n", sob_n, "full assembly depth parameter");
  sob_cmd->add_option("--base", sob_base, "single part: base b");
  sob_cmd->add_option("--alpha", sob_alpha, "single part: alpha");
  sob_cmd->add_option("--beta", sob_beta, "single part: beta");
  sob_cmd->add_option("--eps", sob_eps, "single part: trifling width (default b^-ell* / 2)");
  sob_cmd->add_option("--points", sob_points, "measure the L^p error on this many nodes");
  sob_cmd->add_flag("--normalize", sob_normalize, "divide the target by its norm estimate");
  add_common(sob_cmd, common);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a network document");
  std::string eval_net, eval_at;
  eval_cmd->add_option("--net", eval_net, "network JSON")->required();
  eval_cmd->add_option("--at", eval_at, "point(s): \"x1,x2\", several separated by ';'")->required();
  add_common(eval_cmd, common);

  // encode / decode
  auto* enc_cmd = app.add_subcommand("encode", "sparse integer vector -> bit string");
  std::string enc_x;
  long enc_M = -1, enc_S = -1;
  enc_cmd->add_option("--x", enc_x, "vector, e.g. \"[0,0,-2,0,1]\"")->required();
  enc_cmd->add_option("--M", enc_M, "l1 budget (default ||x||_1)");
  enc_cmd->add_option("--S", enc_S, "entry bound, ||x||_inf < S (default ||x||_inf + 1)");
  add_common(enc_cmd, common);

  auto* dec_cmd = app.add_subcommand("decode", "code document -> vector");
  std::string dec_in;
  dec_cmd->add_option("--in", dec_in, "code JSON from encode --out")->required();
  add_common(dec_cmd, common);

  // rate
  auto* rate_cmd = app.add_subcommand("rate", "empirical approximation rate");
  std::string rate_target = "sin", rate_s = "2", rate_p = "inf", rate_q, rate_sizes = "8,8:11,11";
  long rate_d = 1, rate_points = 64;
  bool rate_normalize = false;
  rate_cmd->add_option("--target", rate_target, "preset id or target JSON file");
  rate_cmd->add_option("--d", rate_d);
  rate_cmd->add_option("--s", rate_s);
  rate_cmd->add_option("--p", rate_p);
  rate_cmd->add_option("--q", rate_q, "smoothness norm (default p)");
  rate_cmd->add_option("--sizes", rate_sizes, "m,n pairs separated by ':'");
  rate_cmd->add_option("--points", rate_points, "error nodes per size");
  rate_cmd->add_flag("--normalize", rate_normalize, "divide the target by its norm estimate");
  add_common(rate_cmd, common);

  // verify
  auto* ver_cmd = app.add_subcommand("verify", "run acceptance criteria");
  std::string ver_modules, ver_ids;
  ver_cmd->add_option("--module", ver_modules, "comma list of module names (default all)");
  ver_cmd->add_option("--criterion", ver_ids, "comma list of criterion ids");
  add_common(ver_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << errors_json("usage", e.what()) << '\n';
    return 2;
  }

  try {
    if (*pwl_cmd) {
      pwl::PwlFunc f;
      if (!pwl_in.empty()) {
        f = pwl::pwl_from_json(read_file(pwl_in));
      } else {
        if (pwl_bp.empty() || pwl_vals.empty()) throw InputError("synth-pwl needs --in or --breakpoints and --values");
        f.breakpoints = number_list(pwl_bp);
        f.values = number_list(pwl_vals);
        f.left_slope = parse_number(pwl_ls);
        f.right_slope = parse_number(pwl_rs);
      }
      f.validate();
      const bool deep = pwl_W > 0 || pwl_L > 0;
      if (deep && (pwl_W < 1 || pwl_L < 1)) throw InputError("deep synthesis needs --W and --L >= 1");
      net::Network g = deep ? pwl::synth_deep(f, net::SizeBudget{static_cast<std::size_t>(pwl_W), static_cast<std::size_t>(pwl_L)})
                            : pwl::synth_shallow(f);
      emit_net(common, std::move(g), "synth-pwl", std::string(" pieces=") + std::to_string(f.pieces()) +
                                                      (deep ? " method=deep" : " method=shallow"));
    } else if (*vec_cmd) {
      codec::IntVector x;
      long M = vec_M;
      if (!vec_in.empty()) {
        auto doc = json::parse(read_file(vec_in));
        x.x = doc.at("x").get<std::vector<long>>();
        if (M < 0 && doc.contains("M")) M = doc["M"].get<long>();
      } else {
        if (vec_x.empty()) throw InputError("synth-vec needs --x or --in");
        x = int_vector(vec_x);
      }
      if (M < 0) M = std::max(1L, x.ell1());
      auto plan = codec::rep_plan(static_cast<long>(x.size()), M, vec_S, vec_T);
      net::Network g = codec::rep_net(x, M, vec_S, vec_T);
      std::ostringstream extra;
      extra << " N=" << x.size() << " M=" << M << " regime=" << codec::regime_name(plan.regime)
            << " bound=(" << plan.bound.width << "," << plan.bound.depth << ")";
      emit_net(common, std::move(g), "synth-vec", extra.str());
    } else if (*poly_cmd) {
      poly::PiecewisePoly f = poly::pwpoly_from_json(read_file(poly_in));
      poly::PolyApproxParams params;
      params.delta = parse_number(poly_delta);
      params.S = poly_S;
      params.T = poly_T;
      params.W0 = poly_W0;
      params.L0 = poly_L0;
      params.p = sobolev::Exponent::parse(poly_p).value();
      params.q = sobolev::Exponent::parse(poly_q).value();
      const Rational eps = poly_eps.empty()
                               ? Rational(1) / Rational(ipow(f.spec.base, static_cast<unsigned long>(f.spec.ell))) / 4
                               : parse_number(poly_eps);
      emit_net(common, poly::pwpoly_net(f, params, eps), "synth-poly",
               " cells=" + ipow(f.spec.base, static_cast<unsigned long>(f.spec.dim * f.spec.ell)).get_str() +
                   " sparse=" + (params.sparse(f.spec) ? "yes" : "no"));
    } else if (*sob_cmd) {
      sobolev::Exponent p = sobolev::Exponent::parse(sob_p.empty() ? sob_q : sob_p);
      sobolev::Exponent p_file = p;
      auto f = load_target(sob_target, sob_d, sob_s, sob_q, sob_normalize, &p_file);
      if (fs::exists(sob_target) && sob_p.empty()) p = p_file;
      std::ostringstream extra;
      net::Network g = [&]() -> net::Network {
        if (sob_base > 0) {
          const auto sc = sobolev::schedule(f.s, p, f.q, f.dim, sob_base, sob_alpha, sob_beta);
          const Rational eps = sob_eps.empty()
                                   ? Rational(1) / Rational(ipow(sob_base, static_cast<unsigned long>(sc.ell_star))) / 2
                                   : parse_number(sob_eps);
          auto part = sobolev::assemble_part(f, p, sob_base, sob_alpha, sob_beta, eps);
          extra << " base=" << sob_base << " ell*=" << sc.ell_star << " kappa=" << to_string(sc.kappa);
          return std::move(part.net);
        }
        if (sob_m < 1 || sob_n < 1) throw InputError("synth-sobolev needs --m and --n, or --base");
        auto full = sobolev::assemble_full(f, p, sob_m, sob_n, false);
        extra << " bases=" << full.bases.size() << " eps=" << to_string(full.eps);
        return std::move(full.net);
      }();
      if (sob_points > 0) {
        sobolev::RateOptions opt;
        opt.points = sob_points;
        opt.seed = common.seed;
        opt.mode = net::Mode::Rational;
        extra << " error=" << sobolev::lp_error(f, g, p, opt) << " p=" << p.str();
      }
      emit_net(common, std::move(g), "synth-sobolev", extra.str());
    } else if (*eval_cmd) {
      net::Network g = net::deserialize(read_file(eval_net));
      const net::Mode mode = mode_or(common, g.mode());
      std::ostringstream out;
      out.precision(17);
      std::unique_ptr<net::ExactEvaluator> exact;
      std::unique_ptr<net::FloatEvaluator> fl;
      if (mode == net::Mode::Rational)
        exact = std::make_unique<net::ExactEvaluator>(g);
      else
        fl = std::make_unique<net::FloatEvaluator>(g);
      std::size_t count = 0;
      for (const auto& pt : split(eval_at, ';')) {
        auto x = number_list(pt);
        ++count;
        if (exact) {
          auto y = (*exact)(x);
          for (std::size_t i = 0; i < y.size(); ++i) out << (i ? "," : "") << y[i].get_str();
        } else {
          std::vector<double> xd;
          for (const auto& v : x) xd.push_back(to_double(v));
          if (xd.size() != g.input_dim()) throw InputError("input length differs from input_dim");
          auto y = (*fl)(xd);
          for (std::size_t i = 0; i < y.size(); ++i) out << (i ? "," : "") << y[i];
        }
        out << '\n';
      }
      std::ostringstream s;
      s << "eval: W=" << g.width() << " L=" << g.depth() << " points=" << count << " mode=" << mode_str(mode);
      if (common.out.empty()) {
        std::cout << out.str();
        std::cerr << s.str() << '\n';
      } else {
        const std::string body = out.str();
        write_atomic(common.out, [&](std::ostream& os) { os << body; });
        std::cout << s.str() << " -> " << common.out << '\n';
      }
    } else if (*enc_cmd) {
      codec::IntVector x = int_vector(enc_x);
      const long M = enc_M < 0 ? x.ell1() : enc_M;
      const long S = enc_S < 0 ? x.max_abs() + 1 : enc_S;
      auto code = codec::encode(x, M, S);
      std::string raw;
      for (auto b : code.bits.bits) raw.push_back(static_cast<char>('0' + b));
      std::ostringstream s;
      s << "encode: regime=" << codec::regime_name(code.regime) << " N=" << code.N << " M=" << code.M
        << " S=" << code.S << " tokens=" << code.tokens.size() << " bits=" << raw;
      if (common.out.empty()) {
        std::cout << s.str() << '\n';
      } else {
        const std::string doc = codec::to_json(code);
        write_atomic(common.out, [&](std::ostream& os) { os << doc; });
        std::cout << s.str() << " -> " << common.out << '\n';
      }
    } else if (*dec_cmd) {
      auto code = codec::code_from_json(read_file(dec_in));
      auto x = codec::decode_reference(code);
      const std::string doc = json{{"x", x.x}, {"M", code.M}}.dump();
      std::ostringstream s;
      s << "decode: regime=" << codec::regime_name(code.regime) << " N=" << x.size() << " x=" << json(x.x).dump();
      if (common.out.empty()) {
        std::cout << s.str() << '\n';
      } else {
        write_atomic(common.out, [&](std::ostream& os) { os << doc; });
        std::cout << s.str() << " -> " << common.out << '\n';
      }
    } else if (*rate_cmd) {
      sobolev::Exponent p = sobolev::Exponent::parse(rate_p);
      sobolev::Exponent p_file = p;
      auto f = load_target(rate_target, rate_d, rate_s, rate_q.empty() ? rate_p : rate_q, rate_normalize, &p_file);
      if (fs::exists(rate_target)) p = p_file;
      std::vector<std::pair<long, long>> sizes;
      for (const auto& pair : split(rate_sizes, ':')) {
        auto mn = split(pair, ',');
        if (mn.size() != 2) throw InputError("--sizes expects m,n pairs separated by ':'");
        sizes.emplace_back(std::stol(mn[0]), std::stol(mn[1]));
      }
      sobolev::RateOptions opt;
      opt.points = rate_points;
      opt.seed = common.seed;
      opt.mode = mode_or(common, net::Mode::Rational);
      auto rep = sobolev::measure_rate(f, p, sizes, opt);
      std::ostringstream s;
      s.precision(6);
      s << "rate: target=" << rep.target << " rows=" << rep.rows.size() << " slope=" << rep.slope
        << " predicted=" << -2 * to_double(f.s) / static_cast<double>(f.dim) << " mode=" << mode_str(opt.mode)
        << " points=" << opt.points << " seed=" << opt.seed;
      const std::string csv = rep.csv();
      if (common.out.empty()) {
        std::cout << csv;
        std::cerr << s.str() << '\n';
      } else {
        write_atomic(common.out, [&](std::ostream& os) { os << csv; });
        std::cout << s.str() << " -> " << common.out << '\n';
      }
    } else if (*ver_cmd) {
      std::vector<std::string> modules = split(ver_modules, ',');
      const auto known = acceptance::module_names();
      for (const auto& m : modules)
        if (std::find(known.begin(), known.end(), m) == known.end()) throw InputError("unknown module '" + m + "'");
      std::vector<int> ids;
      for (const auto& t : split(ver_ids, ',')) ids.push_back(std::stoi(t));
      std::ostringstream log;
      const int failed = acceptance::run(modules, ids, log);
      if (!common.out.empty()) {
        const std::string body = log.str();
        write_atomic(common.out, [&](std::ostream& os) { os << body; });
      }
      std::cout << log.str() << "verify: failed=" << failed << '\n';
      return failed == 0 ? 0 : 1;
    }
  } catch (const InputError& e) {
    std::cerr << errors_json("input", e.what()) << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << errors_json("io", e.what()) << '\n';
    return 4;
  } catch (const json::exception& e) {
    std::cerr << errors_json("input", e.what()) << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << errors_json("input", e.what()) << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << errors_json("internal", e.what()) << '\n';
    return 1;
  }
  return 0;
}
