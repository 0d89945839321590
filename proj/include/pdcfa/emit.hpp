#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdcfa/analysis.hpp"

namespace pdcfa {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DotNames {
  std::function<std::string(StateId)> node;
  std::function<std::string(FrameId)> frame;
  // Node order; StateId order when empty.
  std::function<bool(StateId, StateId)> before;
};

std::string renderDot(const Dsg& g, const DotNames& names);
// Nodes ordered by their control states so that ids do not depend on solver order.
std::string renderDot(const AnalysisRun& run);

std::string expSummary(const Program& p, const Exp& e);
std::string actionText(const AnalysisRun& run, const StackAction& a);

const char* outcomeKey(SolveOutcome o);  // "complete" or "boundExceeded"

nlohmann::ordered_json reportJson(const AnalysisReport& r);
nlohmann::ordered_json reportJson(const AnalysisRun& run, bool withGraph);
// Object keyed by grid cell, in table order.
nlohmann::ordered_json gridJson(const std::vector<AnalysisReport>& cells);

// One row per cell: key, states, edges, singletons, outcome, elapsed.
std::string renderGridTable(const std::string& program, const std::vector<AnalysisReport>& cells);
// One row per program and k with states / edges / singletons per technique.
std::string renderCorpusTable(const std::vector<std::pair<std::string, std::vector<AnalysisReport>>>& rows);

void writeFile(const std::string& path, const std::string& content);
std::string readFile(const std::string& path);

}  // namespace pdcfa
