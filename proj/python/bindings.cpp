#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "dias/job_model.hpp"
#include "dias/phase_type.hpp"
#include "dias/report.hpp"

namespace py = pybind11;
using dias::io::json;

namespace {

// Documents cross the boundary as JSON text; the Python side wraps json.
std::string validate_json(const std::string& text) {
  const auto doc = dias::io::parse_scenario(json::parse(text));
  return json{{"document", "dias.validation"},
              {"valid", true},
              {"scenario_hash", dias::io::hash_hex(doc.hash)},
              {"seed", doc.scenario.seed},
              {"classes", doc.class_names},
              {"policy", std::string(dias::to_string(doc.scenario.policy.kind))}}
      .dump();
}

std::string predict_json(const std::string& text) {
  return dias::io::predict_document(dias::io::parse_scenario(json::parse(text))).dump();
}

std::string simulate_json(const std::string& text, int runs) {
  const auto doc = dias::io::parse_scenario(json::parse(text));
  std::vector<dias::SimulationMetrics> results;
  {
    py::gil_scoped_release release;
    results = dias::run_replications(doc.scenario, runs);
  }
  return dias::io::metrics_document(doc, results).dump();
}

std::string sweep_json(const std::string& text, const std::vector<std::pair<std::string, std::string>>& grid,
                       int runs) {
  std::vector<dias::io::GridAxis> axes;
  for (const auto& [key, values] : grid) axes.push_back({key, json::parse(values).get<std::vector<json>>()});
  const auto document = json::parse(text);
  dias::io::SweepResult result;
  {
    py::gil_scoped_release release;
    result = dias::io::sweep(document, axes, runs);
  }
  return dias::io::sweep_document(result).dump();
}

std::string plan_json(const std::string& scenario, const std::string& targets) {
  const auto doc = dias::io::parse_scenario(json::parse(scenario));
  const auto request = dias::io::parse_targets(json::parse(targets), doc);
  dias::PlanResult result;
  {
    py::gil_scoped_release release;
    result = dias::io::plan(doc, request);
  }
  return dias::io::plan_document(doc, result).dump();
}

py::array_t<double> sample_many(const dias::PhaseTypeDist& d, std::size_t n, std::uint64_t seed) {
  py::array_t<double> out(static_cast<py::ssize_t>(n));
  auto view = out.mutable_unchecked<1>();
  dias::Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) view(static_cast<py::ssize_t>(i)) = d.sample(rng);
  return out;
}

}  // namespace

PYBIND11_MODULE(_dias, m) {
  m.doc() = "Phase-type job models, priority simulation and drop-ratio planning";

  static py::exception<dias::Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<dias::io::SchemaError> schema_error(m, "SchemaError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const dias::io::SchemaError& e) {
      PyErr_SetObject(schema_error.ptr(), py::make_tuple(e.schema_code(), e.what()).ptr());
    } catch (const dias::Error& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple(dias::code_name(e.code()), e.what()).ptr());
    } catch (const json::exception& e) {
      PyErr_SetObject(schema_error.ptr(), py::make_tuple("SCHEMA_PARSE", e.what()).ptr());
    }
  });

  py::class_<dias::PhaseTypeDist>(m, "PhaseType")
      .def(py::init<Eigen::VectorXd, Eigen::MatrixXd>(), py::arg("initial"), py::arg("subgen"))
      .def_property_readonly("phases", &dias::PhaseTypeDist::phases)
      .def_property_readonly("initial", &dias::PhaseTypeDist::initial)
      .def_property_readonly("subgen", &dias::PhaseTypeDist::subgen)
      .def_property_readonly("mass_at_zero", &dias::PhaseTypeDist::mass_at_zero)
      .def("mean", [](const dias::PhaseTypeDist& d) { return dias::mean(d); })
      .def("variance", [](const dias::PhaseTypeDist& d) { return dias::variance(d); })
      .def("scv", [](const dias::PhaseTypeDist& d) { return dias::scv(d); })
      .def("moment", [](const dias::PhaseTypeDist& d, int k) { return dias::moment(d, k); }, py::arg("order"))
      .def("cdf", [](const dias::PhaseTypeDist& d, double t) { return dias::cdf(d, t); }, py::arg("t"))
      .def("quantile", [](const dias::PhaseTypeDist& d, double p) { return dias::quantile(d, p); }, py::arg("p"))
      .def("scaled", &dias::PhaseTypeDist::scaled, py::arg("factor"))
      .def("sample", &sample_many, py::arg("n"), py::arg("seed") = 1)
      .def("__repr__", [](const dias::PhaseTypeDist& d) {
        return "PhaseType(phases=" + std::to_string(d.phases()) + ", mean=" + std::to_string(dias::mean(d)) + ")";
      });

  m.def("exponential", &dias::make_exponential, py::arg("rate"));
  m.def("erlang", &dias::make_erlang, py::arg("phases"), py::arg("rate"));
  m.def("convolve", &dias::convolve, py::arg("a"), py::arg("b"));

  m.def("effective_tasks", &dias::effective_tasks, py::arg("tasks"), py::arg("theta"));
  m.def(
      "wave_probabilities",
      [](std::vector<double> pmf, double theta, int slots) {
        return dias::wave_probabilities(dias::CountPmf(std::move(pmf)), theta, dias::ClusterSpec{slots});
      },
      py::arg("pmf"), py::arg("theta"), py::arg("slots"),
      "pmf[i] is the probability of i + 1 tasks; returns q[d - 1] for d waves.");

  m.def("preset_names", &dias::io::preset_names);
  m.def("preset_json", [](const std::string& name) { return dias::io::preset(name).dump(); }, py::arg("name"));
  m.def("validate_json", &validate_json, py::arg("scenario"));
  m.def("predict_json", &predict_json, py::arg("scenario"));
  m.def("simulate_json", &simulate_json, py::arg("scenario"), py::arg("runs") = 1);
  m.def("sweep_json", &sweep_json, py::arg("scenario"), py::arg("grid"), py::arg("runs") = 5);
  m.def("plan_json", &plan_json, py::arg("scenario"), py::arg("targets"));
}
