#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pdcfa/analysis.hpp"
#include "pdcfa/corpus.hpp"
#include "pdcfa/emit.hpp"
#include "pdcfa/random.hpp"

using namespace pdcfa;

namespace {

enum Exit { kOk = 0, kUsage = 1, kBound = 2, kCounterexample = 3 };

struct Options {
  std::vector<std::string> inputs;
  unsigned k = 0;
  std::string policy;
  bool pushdown = false;
  bool gc = false;
  bool all = false;
  std::string dotOut;
  std::string jsonOut;
  double timeLimit = 60.0;
  std::size_t nodeCap = 50000;
  std::uint64_t seed = 1;
  std::size_t fuel = 100000;
  std::size_t random = 0;
  bool sequential = false;
};

int fail(int code, const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return code;
}

SolveBounds boundsOf(const Options& o) {
  SolveBounds b;
  b.maxNodes = o.nodeCap;
  b.wallClock = std::chrono::milliseconds(static_cast<long long>(o.timeLimit * 1000));
  return b;
}

Policy policyOf(const Options& o) {
  if (o.policy.empty()) return o.k <= 1 ? Policy::forGrid(o.k) : Policy::kCfa(o.k);
  auto p = parsePolicy(o.policy, o.k);
  if (!p) throw CLI::ValidationError("--policy", "unknown policy " + o.policy);
  return *p;
}

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

void checkInputs(const Options& o) {
  for (const auto& f : o.inputs)
    if (!std::filesystem::exists(f)) throw IoError("no such file: " + f);
}

int analyze(const Options& o) {
  checkInputs(o);
  if (o.inputs.size() != 1) return fail(kUsage, "analyze takes exactly one input file");
  AnalysisConfig cfg{policyOf(o), o.pushdown, o.gc, boundsOf(o)};
  auto run = runAnalysis(loadFile(o.inputs[0]), cfg, stem(o.inputs[0]));
  std::cout << renderGridTable(run.report.program, {run.report});
  if (!o.dotOut.empty()) writeFile(o.dotOut, renderDot(run));
  if (!o.jsonOut.empty()) writeFile(o.jsonOut, reportJson(run, true).dump(2) + "\n");
  if (!run.report.complete()) return fail(kBound, std::string("bound exceeded: ") + outcomeName(run.report.outcome));
  return kOk;
}

int grid(const Options& o) {
  checkInputs(o);
  if (o.inputs.empty()) return fail(kUsage, "grid needs an input file");
  nlohmann::ordered_json all = nlohmann::ordered_json::object();
  for (const auto& f : o.inputs) {
    auto cells = compareGrid(loadFile(f), boundsOf(o), stem(f), !o.sequential);
    std::cout << renderGridTable(stem(f), cells);
    all[stem(f)] = gridJson(cells);
  }
  if (!o.jsonOut.empty()) writeFile(o.jsonOut, (o.inputs.size() == 1 ? all.front() : all).dump(2) + "\n");
  return kOk;
}

int corpus(const Options& o) {
  checkInputs(o);
  std::vector<std::pair<std::string, std::string>> programs;
  if (o.inputs.empty())
    for (const auto& n : corpusNames()) programs.emplace_back(n, benchmarkPath(n));
  else
    for (const auto& f : o.inputs) programs.emplace_back(stem(f), f);

  std::vector<std::pair<std::string, std::vector<AnalysisReport>>> rows;
  std::vector<std::string> violations, warnings;
  nlohmann::ordered_json all = nlohmann::ordered_json::object();
  for (const auto& [name, path] : programs) {
    auto cells = compareGrid(loadFile(path), boundsOf(o), name, !o.sequential);
    auto check = relationalCheck(name, cells);
    for (auto& v : check.violations) violations.push_back(std::move(v));
    for (auto& w : check.warnings) warnings.push_back(std::move(w));
    all[name] = gridJson(cells);
    rows.emplace_back(name, std::move(cells));
  }
  std::cout << renderCorpusTable(rows);
  if (!o.jsonOut.empty()) writeFile(o.jsonOut, all.dump(2) + "\n");
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& v : violations) std::cerr << "error: " << v << "\n";
  return violations.empty() ? kOk : kCounterexample;
}

int soundness(const Options& o) {
  checkInputs(o);
  std::vector<std::pair<std::string, ProgramPtr>> programs;
  for (const auto& f : o.inputs) programs.emplace_back(stem(f), loadFile(f));
  for (std::size_t i = 0; i < o.random; ++i)
    programs.emplace_back("random-" + std::to_string(o.seed + i), randomProgram(o.seed + i));
  if (programs.empty()) return fail(kUsage, "soundness needs an input file or --random");

  std::vector<AnalysisConfig> cfgs;
  if (o.all)
    cfgs = gridConfigs(boundsOf(o));
  else
    cfgs.push_back({policyOf(o), o.pushdown, o.gc, boundsOf(o)});

  int code = kOk;
  for (const auto& [name, p] : programs) {
    for (const auto& cfg : cfgs) {
      auto r = soundnessHarness(p, cfg, o.fuel);
      std::cout << name << " " << cfg.key() << " " << (r.ok ? "ok" : "counterexample") << " steps=" << r.stepsChecked;
      if (!r.ok) std::cout << " " << r.message;
      std::cout << "\n";
      if (!r.ok) code = kCounterexample;
    }
  }
  if (code != kOk) std::cerr << "error: soundness counterexample found\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  if (const char* cap = std::getenv("PDCFA_NODE_CAP")) {
    try {
      o.nodeCap = std::stoull(cap);
    } catch (const std::exception&) {
      return fail(kUsage, std::string("PDCFA_NODE_CAP is not a number: ") + cap);
    }
  }

  CLI::App app{"pushdown control-flow analysis with abstract garbage collection"};
  app.require_subcommand(1);
  auto common = [&](CLI::App* sub, bool config) {
    sub->add_option("inputs", o.inputs, "Scheme source files");
    if (config) {
      sub->add_option("--k", o.k, "context depth")->check(CLI::Range(0u, static_cast<unsigned>(kMaxContext)));
      sub->add_option("--policy", o.policy, "mono, 1cfa, poly or kcfa");
      sub->add_flag("--pushdown", o.pushdown, "pushdown analysis instead of the finite-state baseline");
      sub->add_flag("--gc", o.gc, "abstract garbage collection");
    }
    sub->add_option("--time-limit", o.timeLimit, "seconds per analysis")->check(CLI::PositiveNumber);
    sub->add_option("--node-cap", o.nodeCap, "maximum graph nodes per analysis")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "seed for generated programs");
    sub->add_option("--json", o.jsonOut, "write a JSON report");
  };
  auto* an = app.add_subcommand("analyze", "analyze one program");
  common(an, true);
  an->add_option("--dot", o.dotOut, "write the graph in DOT");
  auto* gr = app.add_subcommand("grid", "all eight configurations for k in {0, 1}");
  common(gr, false);
  gr->add_flag("--sequential", o.sequential, "run cells one at a time");
  auto* co = app.add_subcommand("corpus", "the benchmark table and its relational checks");
  common(co, false);
  co->add_flag("--sequential", o.sequential, "run cells one at a time");
  auto* so = app.add_subcommand("soundness", "check analyses against concrete runs");
  common(so, true);
  so->add_flag("--all", o.all, "every grid configuration");
  so->add_option("--fuel", o.fuel, "concrete step limit");
  so->add_option("--random", o.random, "also check this many generated programs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(kUsage, e.what());
  }

  try {
    if (an->parsed()) return analyze(o);
    if (gr->parsed()) return grid(o);
    if (co->parsed()) return corpus(o);
    return soundness(o);
  } catch (const IoError& e) {
    return fail(kUsage, e.what());
  } catch (const ParseError& e) {
    return fail(kUsage, std::string("parse: ") + std::to_string(e.pos.line) + ":" + std::to_string(e.pos.column) +
                            ": " + e.what());
  } catch (const CLI::ValidationError& e) {
    return fail(kUsage, e.what());
  } catch (const std::exception& e) {
    return fail(kUsage, e.what());
  }
}
