#include "pdcfa/corpus.hpp"

#include <algorithm>
#include <cstdlib>

#include "pdcfa/emit.hpp"

namespace pdcfa {

const std::vector<std::string>& corpusNames() {
  static const std::vector<std::string> names{"mj09", "eta", "kcfa2", "kcfa3", "blur", "loop2", "sat"};
  return names;
}

std::string benchmarkDir() {
  if (const char* d = std::getenv("PDCFA_BENCHMARKS")) return d;
  return PDCFA_BENCHMARK_DIR;
}

std::string benchmarkPath(const std::string& name) { return benchmarkDir() + "/" + name + ".scm"; }

ProgramPtr loadFile(const std::string& path) { return compile(readFile(path)); }

ProgramPtr loadBenchmark(const std::string& name) { return loadFile(benchmarkPath(name)); }

namespace {

const AnalysisReport* find(const std::vector<AnalysisReport>& cells, unsigned k, bool pd, bool gc) {
  for (const auto& r : cells)
    if (r.config.policy.k == k && r.config.pushdown == pd && r.config.gc == gc) return &r;
  return nullptr;
}

}  // namespace

RelationalCheck relationalCheck(const std::string& program, const std::vector<AnalysisReport>& cells) {
  RelationalCheck out;
  auto say = [&](const std::string& s) { out.violations.push_back(program + ": " + s); };
  auto warn = [&](const std::string& s) { out.warnings.push_back(program + ": " + s); };
  for (unsigned k : {0u, 1u}) {
    std::string row = "k=" + std::to_string(k) + " ";
    for (bool pd : {false, true}) {
      const auto* off = find(cells, k, pd, false);
      const auto* on = find(cells, k, pd, true);
      if (!off || !on) continue;
      // An unfinished run only over-reports singletons, so the check needs the collected side complete.
      if (on->complete() && off->complete() && on->singletons < off->singletons)
        say(row + (pd ? "pdcfa" : "cfa") + ": gc singletons " + std::to_string(on->singletons) + " < " +
            std::to_string(off->singletons));
    }
    for (bool gc : {false, true}) {
      const auto* base = find(cells, k, false, gc);
      const auto* pd = find(cells, k, true, gc);
      if (!base || !pd) continue;
      if (!pd->complete() && base->complete())
        warn(row + (gc ? "gc " : "") + "pushdown run bounded while baseline completed");
      else if (base->complete() && pd->complete() && base->states < pd->states)
        warn(row + (gc ? "gc " : "") + "baseline states " + std::to_string(base->states) + " < pushdown states " +
            std::to_string(pd->states));
    }
    const auto* fused = find(cells, k, true, true);
    const auto* pdOnly = find(cells, k, true, false);
    if (fused && pdOnly && fused->complete() && pdOnly->complete()) {
      for (const auto& [v, ls] : fused->flowSets) {
        auto it = pdOnly->flowSets.find(v);
        const std::vector<Label> none;
        const auto& wide = it == pdOnly->flowSets.end() ? none : it->second;
        if (!std::includes(wide.begin(), wide.end(), ls.begin(), ls.end()))
          say(row + "fused flow set of " + v + " not within pushdown-only flow set");
      }
    }
  }
  return out;
}

}  // namespace pdcfa
