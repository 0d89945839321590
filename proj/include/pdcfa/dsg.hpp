#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "pdcfa/pushdown.hpp"

namespace pdcfa {

struct Edge {
  StateId from;
  StackAction action;
  StateId to;
  auto operator<=>(const Edge&) const = default;
};

struct Dsg {
  StateId root = 0;
  std::vector<StateId> nodes;     // sorted
  std::vector<FrameId> alphabet;  // sorted
  std::vector<Edge> edges;        // sorted

  bool hasNode(StateId q) const;
  bool operator==(const Dsg&) const = default;
};

struct SolveBounds {
  std::size_t maxNodes = 50000;
  std::size_t maxIters = std::numeric_limits<std::size_t>::max();
  std::chrono::milliseconds wallClock{60000};
};

enum class SolveOutcome { Complete, NodeCapExceeded, IterationCapExceeded, TimeExceeded };
const char* outcomeName(SolveOutcome o);

// What a solver knows about one realizable stack: its top and its frames.
struct StackProfile {
  std::optional<FrameId> top;
  FrameSet frames;
  auto operator<=>(const StackProfile&) const = default;
};

struct NaiveResult {
  Dsg dsg;
  SolveOutcome outcome = SolveOutcome::Complete;
  std::size_t rounds = 0;
};

// Recomputes realizable stacks from scratch every round; edges found in one
// round are only seen by the next.
NaiveResult naiveSolve(const IpdsOracle& oracle, const SolveBounds& bounds);

class EpsSummaries {
 public:
  EpsSummaries() = default;
  explicit EpsSummaries(std::vector<std::pair<StateId, StateId>> pairs);

  // Nodes with a non-empty, net-empty path into q.
  std::vector<StateId> predecessors(StateId q) const;
  // Recorded pairs: direct eps edges and pop-induced summaries.
  const std::vector<std::pair<StateId, StateId>>& pairs() const { return pairs_; }

 private:
  std::vector<std::pair<StateId, StateId>> pairs_;  // sorted
  std::map<StateId, std::vector<StateId>> reverse_;
};

class NodeCaches {
 public:
  void add(StateId q, StackProfile p);
  FrameSet topFrames(StateId q) const;
  FrameSet stackFrames(StateId q) const;
  const std::vector<StackProfile>* profiles(StateId q) const;
  bool has(StateId q) const { return profiles_.count(q) > 0; }
  std::size_t profileCount() const;
  // Without introspection the solver only tracks tops, so stackFrames is partial.
  bool framesTracked() const { return framesTracked_; }
  void setFramesTracked(bool b) { framesTracked_ = b; }

 private:
  bool framesTracked_ = true;
  std::map<StateId, std::vector<StackProfile>> profiles_;
};

struct SummaryStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t summaries = 0;
  std::size_t profiles = 0;
  std::size_t topFrames = 0;
  std::size_t stackFrames = 0;
};

struct SummaryResult {
  Dsg dsg;
  EpsSummaries eps;
  NodeCaches caches;
  SolveOutcome outcome = SolveOutcome::Complete;
  std::size_t steps = 0;
};

SummaryResult summarize(const IpdsOracle& oracle, const SolveBounds& bounds,
                        const std::function<void(const SummaryStats&)>& observer = {});

// Nodes reachable from each entry (the root and push targets) by net-empty
// paths, computed from the graph alone.
std::map<StateId, std::vector<StateId>> balancedReach(const Dsg& g);

// Accepts the realizable stacks at s, spelled bottom-up.
Nfa stacksNfa(const Dsg& g, StateId s);
// Accepted stacks of at most maxLen frames, top first.
std::vector<std::vector<FrameId>> acceptedStacks(const Nfa& nfa, std::size_t maxLen);
// Nodes at which the stacks automaton accepts something.
std::vector<StateId> legalNodes(const Dsg& g);

FrameSet frameSetOf(const Dsg& g, const NodeCaches& caches, StateId s);

}  // namespace pdcfa
