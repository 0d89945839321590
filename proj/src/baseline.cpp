#include "pdcfa/baseline.hpp"

#include <algorithm>
#include <set>

#include "pdcfa/gc.hpp"

namespace pdcfa {

std::size_t hashOf(const KEntry& e) { return hashMix(hashOf(e.frame), e.next); }

std::size_t hashOf(const BaselineState& s) {
  std::size_t h = hashMix(hashOf(s.control()), s.kstore.hash());
  return hashMix(h, s.kptr);
}

BaselineMachine::BaselineMachine(ProgramPtr program, Policy policy, bool gc)
    : program_(std::move(program)), policy_(policy), gc_(gc) {
  const Exp& e = program_->root();
  root_ = states_.intern(BaselineState{&e, AbsEnv{}, AbsStore{}, KStore{}, kHalt, {}});
}

std::vector<KAddr> BaselineMachine::liveKAddrs(const KStore& ks, KAddr kptr) {
  std::set<KAddr> seen;
  std::vector<KAddr> work;
  if (kptr != kHalt) {
    seen.insert(kptr);
    work.push_back(kptr);
  }
  while (!work.empty()) {
    KAddr k = work.back();
    work.pop_back();
    if (const auto* es = ks.find(k))
      for (const auto& e : *es)
        if (e.next != kHalt && seen.insert(e.next).second) work.push_back(e.next);
  }
  return {seen.begin(), seen.end()};
}

BaselineState BaselineMachine::collect(const BaselineState& s) const {
  auto live = liveKAddrs(s.kstore, s.kptr);
  std::vector<AbsFrame> frames;
  for (KAddr k : live)
    if (const auto* es = s.kstore.find(k))
      for (const auto& e : *es) frames.push_back(e.frame);
  BaselineState out = s;
  out.store = collectControl(s.control(), frames).store;
  out.kstore = s.kstore.restricted([&](KAddr k) { return std::binary_search(live.begin(), live.end(), k); });
  return out;
}

const std::vector<StateId>& BaselineMachine::successors(StateId id) {
  if (auto it = succ_.find(id); it != succ_.end()) return it->second;
  BaselineState s = gc_ ? collect(states_.get(id)) : states_.get(id);
  ControlState q = s.control();
  std::set<StateId> out;
  auto add = [&](const ControlState& next, KStore ks, KAddr kptr) {
    out.insert(states_.intern(BaselineState{next.exp, next.env, next.store, std::move(ks), kptr, next.history}));
  };

  for (const auto& t : stepControl(q, nullptr, policy_)) {
    if (t.kind == ActionKind::Eps) {
      add(t.next, s.kstore, s.kptr);
    } else if (t.kind == ActionKind::Push) {
      KAddr k = t.frame->body->label;
      add(t.next, s.kstore.joined(k, {KEntry{*t.frame, s.kptr}}), k);
    }
  }
  if (s.kptr != kHalt) {
    if (const auto* entries = s.kstore.find(s.kptr)) {
      for (const auto& ke : *entries)
        for (const auto& t : stepControl(q, &ke.frame, policy_))
          if (t.kind == ActionKind::Pop) add(t.next, s.kstore, ke.next);
    }
  }
  return succ_.emplace(id, std::vector<StateId>(out.begin(), out.end())).first->second;
}

IpdsOracle toOracle(std::shared_ptr<BaselineMachine> m) {
  IpdsOracle o;
  o.root = m->root();
  o.introspective = false;
  o.step = [m](StateId q, std::optional<FrameId>, std::span<const FrameId>) {
    std::vector<Transition> out;
    for (StateId s : m->successors(q)) out.push_back({StackAction::eps(), s});
    return out;
  };
  return o;
}

}  // namespace pdcfa
