#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "pdcfa/abstract.hpp"

namespace pdcfa {

using StateId = std::uint32_t;
using FrameId = std::uint32_t;
using FrameSet = std::vector<FrameId>;  // sorted, duplicate free

struct StackAction {
  ActionKind kind = ActionKind::Eps;
  FrameId frame = 0;  // meaningless for Eps

  static StackAction eps() { return {ActionKind::Eps, 0}; }
  static StackAction push(FrameId f) { return {ActionKind::Push, f}; }
  static StackAction pop(FrameId f) { return {ActionKind::Pop, f}; }
  auto operator<=>(const StackAction&) const = default;
};

std::vector<StackAction> net(std::span<const StackAction> actions);
// Top of the stack first; absent when the net string still pops.
std::optional<std::vector<FrameId>> stackify(std::span<const StackAction> actions);

struct Transition {
  StackAction action;
  StateId target;
  auto operator<=>(const Transition&) const = default;
};

struct RpdsOracle {
  StateId root = 0;
  std::function<std::vector<Transition>(StateId, std::optional<FrameId>)> stepTop;
};

struct IpdsOracle {
  StateId root = 0;
  std::function<std::vector<Transition>(StateId, std::optional<FrameId>, std::span<const FrameId>)> step;
  // False when step ignores the frame set; solvers may then skip tracking it.
  bool introspective = true;
};

IpdsOracle lift(RpdsOracle rpds);

struct Nfa {
  struct Arc {
    StateId from;
    std::optional<FrameId> label;
    StateId to;
    auto operator<=>(const Arc&) const = default;
  };
  std::vector<StateId> states;
  std::vector<FrameId> alphabet;
  std::vector<Arc> transitions;
  StateId start = 0;
  std::vector<StateId> accepting;
};

// Dense ids for structurally equal values.
template <class T>
class Interner {
 public:
  std::uint32_t intern(const T& v) {
    std::size_t h = std::hash<T>{}(v);
    auto range = index_.equal_range(h);
    for (auto it = range.first; it != range.second; ++it)
      if (values_[it->second] == v) return it->second;
    auto id = static_cast<std::uint32_t>(values_.size());
    values_.push_back(v);
    index_.emplace(h, id);
    return id;
  }
  std::optional<std::uint32_t> find(const T& v) const {
    auto range = index_.equal_range(std::hash<T>{}(v));
    for (auto it = range.first; it != range.second; ++it)
      if (values_[it->second] == v) return it->second;
    return std::nullopt;
  }
  const T& get(std::uint32_t id) const { return values_.at(id); }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<T> values_;
  std::unordered_multimap<std::size_t, std::uint32_t> index_;
};

// The abstract machine read as a pushdown system over interned control
// states and frames.
class AbstractPds {
 public:
  AbstractPds(ProgramPtr program, Policy policy);

  StateId root() const { return root_; }
  const ControlState& state(StateId q) const { return states_.get(q); }
  const AbsFrame& frame(FrameId f) const { return frames_.get(f); }
  StateId internState(const ControlState& q) { return states_.intern(q); }
  FrameId internFrame(const AbsFrame& f) { return frames_.intern(f); }
  std::size_t stateCount() const { return states_.size(); }
  std::size_t frameCount() const { return frames_.size(); }
  const Program& program() const { return *program_; }
  const Policy& policy() const { return policy_; }

  std::vector<Transition> stepTop(StateId q, std::optional<FrameId> top);
  // Collects garbage against the given frames (plus top) before stepping.
  std::vector<Transition> stepIntro(StateId q, std::optional<FrameId> top, std::span<const FrameId> frames);

 private:
  std::vector<Transition> intern(const std::vector<AbsTransition>& ts);

  ProgramPtr program_;
  Policy policy_;
  Interner<ControlState> states_;
  Interner<AbsFrame> frames_;
  StateId root_;
};

RpdsOracle toRpds(std::shared_ptr<AbstractPds> pds);
IpdsOracle toIpds(std::shared_ptr<AbstractPds> pds);

}  // namespace pdcfa
