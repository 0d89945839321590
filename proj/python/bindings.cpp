#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "pdcfa/analysis.hpp"
#include "pdcfa/corpus.hpp"
#include "pdcfa/emit.hpp"

namespace py = pybind11;
using namespace pdcfa;

namespace {

AnalysisConfig makeConfig(unsigned k, const std::string& policy, bool pushdown, bool gc, std::size_t nodeCap) {
  AnalysisConfig cfg;
  if (policy.empty()) {
    cfg.policy = k <= 1 ? Policy::forGrid(k) : Policy::kCfa(k);
  } else {
    auto p = parsePolicy(policy, k);
    if (!p) throw std::invalid_argument("unknown policy " + policy);
    cfg.policy = *p;
  }
  cfg.pushdown = pushdown;
  cfg.gc = gc;
  cfg.bounds.maxNodes = nodeCap;
  return cfg;
}

// JSON crosses the boundary as text; the Python side parses it.
std::string analyzeJson(const std::string& source, const std::string& name, unsigned k, const std::string& policy,
                        bool pushdown, bool gc, std::size_t nodeCap, bool graph) {
  auto run = runAnalysis(compile(source), makeConfig(k, policy, pushdown, gc, nodeCap), name);
  return reportJson(run, graph).dump();
}

std::string dot(const std::string& source, unsigned k, const std::string& policy, bool pushdown, bool gc,
                std::size_t nodeCap) {
  auto run = runAnalysis(compile(source), makeConfig(k, policy, pushdown, gc, nodeCap), "");
  return renderDot(run);
}

std::string gridJsonText(const std::string& source, const std::string& name, std::size_t nodeCap) {
  SolveBounds b;
  b.maxNodes = nodeCap;
  return gridJson(compareGrid(compile(source), b, name)).dump();
}

py::dict soundness(const std::string& source, unsigned k, bool pushdown, bool gc, std::size_t fuel) {
  auto r = soundnessHarness(compile(source), makeConfig(k, "", pushdown, gc, SolveBounds{}.maxNodes), fuel);
  py::dict d;
  d["ok"] = r.ok;
  d["failing_step"] = r.failingStep;
  d["message"] = r.message;
  d["steps_checked"] = r.stepsChecked;
  d["on_demand"] = r.onDemand;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pdcfa, m) {
  m.doc() = "pushdown control-flow analysis with abstract garbage collection";
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("anf", [](const std::string& source) { return print(*compile(source)); }, py::arg("source"));
  m.def("benchmark_source", [](const std::string& name) { return readFile(benchmarkPath(name)); }, py::arg("name"));
  m.def("corpus_names", [] { return corpusNames(); });
  m.def("analyze_json", &analyzeJson, py::arg("source"), py::arg("name") = "", py::arg("k") = 0u,
        py::arg("policy") = "", py::arg("pushdown") = true, py::arg("gc") = true,
        py::arg("node_cap") = SolveBounds{}.maxNodes, py::arg("graph") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("dot", &dot, py::arg("source"), py::arg("k") = 0u, py::arg("policy") = "", py::arg("pushdown") = true,
        py::arg("gc") = true, py::arg("node_cap") = SolveBounds{}.maxNodes, py::call_guard<py::gil_scoped_release>());
  m.def("grid_json", &gridJsonText, py::arg("source"), py::arg("name") = "",
        py::arg("node_cap") = SolveBounds{}.maxNodes, py::call_guard<py::gil_scoped_release>());
  m.def("soundness", &soundness, py::arg("source"), py::arg("k") = 0u, py::arg("pushdown") = true,
        py::arg("gc") = true, py::arg("fuel") = 100000);
}
