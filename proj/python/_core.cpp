#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hitlab/error.hpp"
#include "hitlab/harness.hpp"
#include "hitlab/hitting.hpp"
#include "hitlab/observed.hpp"
#include "hitlab/parallel.hpp"
#include "hitlab/return_stats.hpp"

namespace py = pybind11;
using namespace hitlab;

namespace {

// Results cross the boundary as JSON text; the Python package decodes them.
std::string run_config(const std::string& text, unsigned workers, std::optional<std::uint64_t> seed) {
  auto cfg = parse_config(text);
  if (seed) cfg.seed = *seed;
  py::gil_scoped_release release;
  return run(cfg, {workers}).document.dump();
}

std::string report_json(const std::vector<std::string>& docs) {
  std::vector<Json> parsed;
  for (const auto& d : docs) parsed.push_back(Json::parse(d));
  return report(parsed).text;
}

std::pair<std::uint64_t, bool> py_hitting_time(const std::string& system, const std::vector<double>& x,
                                               const std::string& observable, double r, std::uint64_t cap) {
  const auto sys = parse_system(system);
  const auto f = parse_observable(observable, sys.dimension());
  const auto h = hitting_time(sys, point_from_doubles(sys, x), f, r, cap);
  return {h.tau, h.censored};
}

std::vector<double> py_orbit(const std::string& system, const std::vector<double>& x, std::uint64_t n) {
  const auto sys = parse_system(system);
  return orbit_window(sys, point_from_doubles(sys, x), n).coords();
}

std::vector<std::vector<double>> py_sample(const std::string& system, std::uint64_t seed, std::size_t count) {
  const auto sys = parse_system(system);
  std::vector<std::vector<double>> out;
  for (const auto& p : sample_invariant(sys, seed, count)) out.push_back(p.coords());
  return out;
}

py::dict py_dimension(const std::string& system, const std::string& observable, const std::vector<double>& radii,
                      std::uint64_t seed, std::size_t samples) {
  const auto sys = parse_system(system);
  const auto d = estimate_dimension(parse_observable(observable, sys.dimension()), RadiusLadder(radii), sys, seed, samples);
  py::dict out;
  out["d_upper"] = d.d_upper;
  out["d_lower"] = d.d_lower;
  out["slope"] = d.slope;
  out["exact"] = d.exact;
  std::vector<double> mu;
  for (const auto& m : d.measures) mu.push_back(m.value);
  out["measures"] = mu;
  return out;
}

py::dict py_return_curve(const std::string& system, const std::string& observable, double r, std::uint64_t seed,
                         std::size_t count) {
  const auto sys = parse_system(system);
  const auto sample = return_times(sys, parse_observable(observable, sys.dimension()), r, seed, count);
  const auto c = return_curve(sample, default_return_grid());
  py::dict out;
  out["t"] = c.t;
  out["g"] = c.g;
  out["exp_law_distance"] = exp_law_distance(c);
  out["kac_product"] = kac_check(sample).product;
  return out;
}

std::size_t py_rank(const std::string& map, std::size_t dim, const std::vector<double>& x) {
  return jacobian_rank(parse_observation_map(map, dim), x).rank;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "hitlab core bindings";

  static py::exception<Error> error(m, "HitlabError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, error_record(e).dump().c_str());
    }
  });

  m.attr("SCHEMA_VERSION") = kSchemaVersion;
  m.def("catalog", &catalog_listing, "Catalog listing as text.");
  m.def("run_config", &run_config, py::arg("text"), py::arg("workers") = 0, py::arg("seed") = py::none(),
        "Run an INI config given as text; returns the result document as JSON text.");
  m.def("report", &report_json, py::arg("documents"), "Report text for result documents given as JSON text.");
  m.def(
      "selftest",
      [] {
        std::vector<std::tuple<std::string, bool, std::string>> out;
        for (const auto& tc : selftest()) out.emplace_back(tc.name, tc.passed, tc.detail);
        return out;
      },
      "Built-in examples as (name, passed, detail) tuples.");
  m.def("orbit", &py_orbit, py::arg("system"), py::arg("x"), py::arg("n"), "Coordinates of T^n x.");
  m.def("sample_invariant", &py_sample, py::arg("system"), py::arg("seed"), py::arg("count"));
  m.def("hitting_time", &py_hitting_time, py::arg("system"), py::arg("x"), py::arg("observable"), py::arg("r"),
        py::arg("cap"), "(tau, censored) for the first entry into {f <= r}.");
  m.def("estimate_dimension", &py_dimension, py::arg("system"), py::arg("observable"), py::arg("radii"),
        py::arg("seed"), py::arg("samples") = 100'000);
  m.def("return_curve", &py_return_curve, py::arg("system"), py::arg("observable"), py::arg("r"), py::arg("seed"),
        py::arg("count") = 10'000);
  m.def("jacobian_rank", &py_rank, py::arg("map"), py::arg("dim"), py::arg("x"));
  m.def("set_workers", &set_default_workers, py::arg("workers"));
}
