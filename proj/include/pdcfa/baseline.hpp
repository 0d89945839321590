#pragma once

#include <limits>
#include <memory>
#include <unordered_map>

#include "pdcfa/pushdown.hpp"

namespace pdcfa {

// Finite-state k-CFA: continuations live in a store of their own, keyed by
// the label of the expression they resume.
using KAddr = std::uint32_t;
inline constexpr KAddr kHalt = std::numeric_limits<KAddr>::max();

struct KEntry {
  AbsFrame frame;
  KAddr next;
  bool operator==(const KEntry&) const = default;
  std::strong_ordering operator<=>(const KEntry& o) const {
    if (auto c = frame <=> o.frame; c != 0) return c;
    return next <=> o.next;
  }
};
std::size_t hashOf(const KEntry& e);

using KStore = SetMap<KAddr, KEntry>;

struct BaselineState {
  const Exp* exp;
  AbsEnv env;
  AbsStore store;
  KStore kstore;
  KAddr kptr;
  History history;

  ControlState control() const { return {exp, env, store, history}; }
  bool operator==(const BaselineState& o) const {
    return exp == o.exp && kptr == o.kptr && env == o.env && store == o.store && kstore == o.kstore &&
           history == o.history;
  }
};
std::size_t hashOf(const BaselineState& s);

}  // namespace pdcfa

template <>
struct std::hash<pdcfa::BaselineState> {
  std::size_t operator()(const pdcfa::BaselineState& s) const { return pdcfa::hashOf(s); }
};

namespace pdcfa {

class BaselineMachine {
 public:
  BaselineMachine(ProgramPtr program, Policy policy, bool gc);

  StateId root() const { return root_; }
  const BaselineState& state(StateId q) const { return states_.get(q); }
  std::size_t stateCount() const { return states_.size(); }
  const Program& program() const { return *program_; }
  const Policy& policy() const { return policy_; }
  bool gc() const { return gc_; }

  const std::vector<StateId>& successors(StateId q);

  // Continuation addresses reachable from kptr through the continuation store.
  static std::vector<KAddr> liveKAddrs(const KStore& ks, KAddr kptr);
  BaselineState collect(const BaselineState& s) const;

 private:
  ProgramPtr program_;
  Policy policy_;
  bool gc_;
  Interner<BaselineState> states_;
  std::unordered_map<StateId, std::vector<StateId>> succ_;
  StateId root_;
};

// Every transition is an eps edge; the stack lives in the states.
IpdsOracle toOracle(std::shared_ptr<BaselineMachine> m);

}  // namespace pdcfa
