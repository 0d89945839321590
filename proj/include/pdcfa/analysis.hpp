#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pdcfa/baseline.hpp"
#include "pdcfa/concrete.hpp"
#include "pdcfa/dsg.hpp"

namespace pdcfa {

struct AnalysisConfig {
  Policy policy = Policy::mono();
  bool pushdown = true;
  bool gc = false;
  SolveBounds bounds;

  // Grid key such as "k0-pdcfa-gc".
  std::string key() const;
};

// The eight grid cells for k in {0, 1}, in table column order.
std::vector<AnalysisConfig> gridConfigs(const SolveBounds& bounds);

struct AnalysisReport {
  std::string program;
  AnalysisConfig config;
  std::size_t states = 0;
  std::size_t edges = 0;
  // Lambda labels bound to each variable in any reachable store.
  std::map<std::string, std::vector<Label>> flowSets;
  // Lambda labels in operator position, per call expression label.
  std::map<Label, std::vector<Label>> callFlows;
  std::size_t singletons = 0;
  std::chrono::milliseconds elapsed{0};
  SolveOutcome outcome = SolveOutcome::Complete;

  bool complete() const { return outcome == SolveOutcome::Complete; }
};

struct AnalysisRun {
  AnalysisReport report;
  Dsg dsg;
  ProgramPtr program;
  std::shared_ptr<AbstractPds> pds;            // pushdown configurations
  std::shared_ptr<BaselineMachine> baseline;   // finite-state configurations
  NodeCaches caches;

  ControlState control(StateId q) const;
  // Binder and body label of a frame, for rendering.
  std::string frameText(FrameId f) const;
};

AnalysisRun runAnalysis(ProgramPtr p, const AnalysisConfig& cfg, const std::string& name = "");
AnalysisRun finiteBaseline(ProgramPtr p, const Policy& policy, bool gc, const SolveBounds& bounds,
                           const std::string& name = "");

// Fills states, edges, flow sets and singletons from a solved graph.
void summarizeFlows(AnalysisRun& run);

std::vector<AnalysisReport> compareGrid(ProgramPtr p, const SolveBounds& bounds, const std::string& name = "",
                                        bool parallel = true);

struct SoundnessResult {
  bool ok = true;
  std::size_t failingStep = 0;
  std::string message;
  std::size_t stepsChecked = 0;
  // The graph was cut off by a bound, so transitions were taken from the
  // oracle at configurations that simulate the trace.
  bool onDemand = false;
  concrete::Outcome concreteOutcome = concrete::Outcome::Final;
};

// Follows the concrete trace through the graph: every concrete step must be
// matched by an edge whose target over-approximates the next configuration.
SoundnessResult checkSoundness(const AnalysisRun& run, const concrete::RunRecord& trace);
// The same containment, stepping the machine itself instead of reading the graph.
SoundnessResult checkSoundnessOnDemand(const AnalysisRun& run, const concrete::RunRecord& trace);
SoundnessResult soundnessHarness(ProgramPtr p, const AnalysisConfig& cfg, std::size_t fuel);

}  // namespace pdcfa
