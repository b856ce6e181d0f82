// Python bindings: networks, constructions and the rate harness.
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "relunet/bits.hpp"
#include "relunet/codec.hpp"
#include "relunet/grid.hpp"
#include "relunet/poly.hpp"
#include "relunet/pwl.hpp"
#include "relunet/sobolev.hpp"

namespace py = pybind11;
using namespace relunet;

namespace {

// int, fractions.Fraction, str "p/q" or float (converted exactly).
Rational to_rational(const py::handle& obj) {
  if (py::isinstance<py::bool_>(obj)) throw InputError("bool is not a number");
  if (py::isinstance<py::int_>(obj)) return parse_rational(py::str(obj).cast<std::string>());
  if (py::isinstance<py::float_>(obj)) {
    const double v = obj.cast<double>();
    if (!std::isfinite(v)) throw InputError("non-finite input");
    return from_double(v);
  }
  if (py::isinstance<py::str>(obj)) return parse_rational(obj.cast<std::string>());
  if (py::hasattr(obj, "numerator") && py::hasattr(obj, "denominator"))
    return parse_rational(py::str(obj.attr("numerator")).cast<std::string>() + "/" +
                          py::str(obj.attr("denominator")).cast<std::string>());
  throw InputError("expected int, float, str or Fraction");
}

std::vector<Rational> to_rationals(const py::iterable& xs) {
  std::vector<Rational> out;
  for (auto v : xs) out.push_back(to_rational(v));
  return out;
}

py::object to_fraction(const Rational& r) {
  static py::object fraction = py::module_::import("fractions").attr("Fraction");
  return fraction(py::int_(py::str(r.get_num().get_str())), py::int_(py::str(r.get_den().get_str())));
}

py::list to_fractions(const std::vector<Rational>& v) {
  py::list out;
  for (const auto& r : v) out.append(to_fraction(r));
  return out;
}

sobolev::Exponent exponent(const py::handle& obj) {
  if (py::isinstance<py::str>(obj)) return sobolev::Exponent::parse(obj.cast<std::string>());
  if (py::isinstance<py::float_>(obj) && std::isinf(obj.cast<double>())) return sobolev::Exponent::infinity();
  return sobolev::Exponent::parse(py::str(obj).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_relunet, m) {
  m.doc() = "Exact ReLU network constructions";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  py::class_<net::Network>(m, "Network")
      .def_static("from_json", [](const std::string& text) { return net::deserialize(text); })
      .def("to_json", [](const net::Network& g) { return net::serialize(g); })
      .def_property_readonly("width", &net::Network::width)
      .def_property_readonly("depth", &net::Network::depth)
      .def_property_readonly("nnz", &net::Network::nnz)
      .def_property_readonly("input_dim", &net::Network::input_dim)
      .def_property_readonly("output_dim", &net::Network::output_dim)
      .def_property_readonly("hidden_dims", &net::Network::hidden_dims)
      .def_property_readonly("mode",
                             [](const net::Network& g) { return g.mode() == net::Mode::Float ? "float" : "rational"; })
      .def(
          "evaluate",
          [](const net::Network& g, const py::iterable& x) { return to_fractions(net::evaluate(g, to_rationals(x))); },
          py::arg("x"), "Exact output as a list of Fraction.")
      .def(
          "evaluate_float",
          [](const net::Network& g, const std::vector<double>& x) { return net::FloatEvaluator(g)(x); },
          py::arg("x"))
      .def(
          "evaluate_many",
          [](const net::Network& g, const std::vector<std::vector<double>>& xs) {
            net::FloatEvaluator fe(g);
            std::vector<std::vector<double>> out;
            out.reserve(xs.size());
            for (const auto& x : xs) out.push_back(fe(x));
            return out;
          },
          py::arg("xs"), "Float evaluation of a batch of points.")
      .def("lower", [](const net::Network& g) { return net::lower(g); });

  m.def("compose", [](const net::Network& f1, const net::Network& f2) { return net::compose(f1, f2); },
        py::arg("inner"), py::arg("outer"));
  m.def("identity", [](std::size_t dim, std::size_t depth) { return net::identity(dim, depth); }, py::arg("dim"),
        py::arg("depth") = 1);

  m.def(
      "synth_pwl",
      [](const py::iterable& breakpoints, const py::iterable& values, const py::handle& left_slope,
         const py::handle& right_slope, std::size_t W, std::size_t L) {
        pwl::PwlFunc f;
        f.breakpoints = to_rationals(breakpoints);
        f.values = to_rationals(values);
        f.left_slope = to_rational(left_slope);
        f.right_slope = to_rational(right_slope);
        f.validate();
        return (W || L) ? pwl::synth_deep(f, {W, L}) : pwl::synth_shallow(f);
      },
      py::arg("breakpoints"), py::arg("values"), py::arg("left_slope") = 0, py::arg("right_slope") = 0,
      py::arg("W") = 0, py::arg("L") = 0, "Piecewise-linear interpolant; W and L select the deep form.");

  m.def("extract_heads", &bits::extract_heads, py::arg("n"), py::arg("m"));
  m.def("extract_stream", &bits::extract_stream, py::arg("n"), py::arg("m"), py::arg("L"));

  m.def(
      "encode",
      [](const std::vector<long>& x, long M, long S) {
        auto c = codec::encode(codec::IntVector{x}, M, S);
        std::string bits;
        for (auto b : c.bits.bits) bits.push_back(static_cast<char>('0' + b));
        py::dict out;
        out["regime"] = codec::regime_name(c.regime);
        out["bits"] = bits;
        out["json"] = codec::to_json(c);
        return out;
      },
      py::arg("x"), py::arg("M"), py::arg("S"));
  m.def(
      "decode", [](const std::string& code_json) { return codec::decode_reference(codec::code_from_json(code_json)).x; },
      py::arg("code_json"));
  m.def(
      "rep_net", [](const std::vector<long>& x, long M, long S, long T) { return codec::rep_net(codec::IntVector{x}, M, S, T); },
      py::arg("x"), py::arg("M"), py::arg("S") = 1, py::arg("T") = 1);

  m.def(
      "index_net",
      [](long base, long ell, long dim, const py::handle& eps, long depth) {
        grid::GridSpec spec{base, ell, dim, to_rational(eps)};
        spec.validate();
        return grid::index_net(spec, depth);
      },
      py::arg("base"), py::arg("ell"), py::arg("dim"), py::arg("eps"), py::arg("depth"));
  m.def("product_net", &poly::product_net, py::arg("k"), py::arg("L"));
  m.def("median_net", &sobolev::median_net, py::arg("d"), py::arg("j"));

  py::class_<sobolev::TargetFunction>(m, "Target")
      .def_readonly("name", &sobolev::TargetFunction::name)
      .def_readonly("dim", &sobolev::TargetFunction::dim)
      .def_readonly("declared_norm", &sobolev::TargetFunction::declared_norm)
      .def("__call__", [](const sobolev::TargetFunction& f, const std::vector<double>& x) { return f.eval(x); });
  m.def(
      "make_target",
      [](const std::string& preset, long d, const py::handle& s, const py::handle& q, bool normalize) {
        const Rational sv = to_rational(s);
        const auto qv = exponent(q);
        const double scale = normalize ? sobolev::make_target(preset, d, sv, qv).declared_norm : 1.0;
        return sobolev::make_target(preset, d, sv, qv, scale);
      },
      py::arg("preset"), py::arg("d") = 1, py::arg("s") = 2, py::arg("q") = "inf", py::arg("normalize") = false);
  m.def(
      "assemble_part",
      [](const sobolev::TargetFunction& f, const py::handle& p, long base, long alpha, long beta, const py::handle& eps) {
        return std::move(sobolev::assemble_part(f, exponent(p), base, alpha, beta, to_rational(eps)).net);
      },
      py::arg("target"), py::arg("p"), py::arg("base"), py::arg("alpha"), py::arg("beta"), py::arg("eps"));
  m.def(
      "assemble_full",
      [](const sobolev::TargetFunction& f, const py::handle& p, long mm, long n) {
        auto full = sobolev::assemble_full(f, exponent(p), mm, n, false);
        py::dict out;
        out["bases"] = full.bases;
        out["ell_stars"] = full.ell_stars;
        out["eps"] = to_fraction(full.eps);
        out["network"] = std::move(full.net);
        return out;
      },
      py::arg("target"), py::arg("p"), py::arg("m"), py::arg("n"));
  m.def(
      "measure_rate",
      [](const sobolev::TargetFunction& f, const py::handle& p, const std::vector<std::pair<long, long>>& sizes,
         long points, unsigned long seed, const std::string& mode) {
        sobolev::RateOptions opt;
        opt.points = points;
        opt.seed = seed;
        if (mode != "rational" && mode != "float") throw InputError("mode must be rational or float");
        opt.mode = mode == "float" ? net::Mode::Float : net::Mode::Rational;
        const auto pe = exponent(p);
        sobolev::RateReport rep;
        {
          py::gil_scoped_release release;
          rep = sobolev::measure_rate(f, pe, sizes, opt);
        }
        return py::make_tuple(rep.csv(), rep.slope);
      },
      py::arg("target"), py::arg("p"), py::arg("sizes"), py::arg("points") = 64, py::arg("seed") = 1,
      py::arg("mode") = "rational", "Returns (csv, fitted slope).");
}
