#pragma once

#include <string>
#include <vector>

#include "pdcfa/analysis.hpp"

namespace pdcfa {

// The seven table benchmarks, in table order.
const std::vector<std::string>& corpusNames();

std::string benchmarkDir();
std::string benchmarkPath(const std::string& name);
ProgramPtr loadBenchmark(const std::string& name);
ProgramPtr loadFile(const std::string& path);

struct RelationalCheck {
  // GC never loses singletons; the fused flow sets stay within pushdown-only ones.
  std::vector<std::string> violations;
  // Expected but not guaranteed: the finite-state baseline is never smaller.
  std::vector<std::string> warnings;
};

RelationalCheck relationalCheck(const std::string& program, const std::vector<AnalysisReport>& cells);

}  // namespace pdcfa
