#include "pdcfa/pushdown.hpp"

#include <algorithm>

#include "pdcfa/gc.hpp"

namespace pdcfa {

std::vector<StackAction> net(std::span<const StackAction> actions) {
  std::vector<StackAction> out;
  for (const auto& a : actions) {
    if (a.kind == ActionKind::Eps) continue;
    if (a.kind == ActionKind::Pop && !out.empty() && out.back().kind == ActionKind::Push &&
        out.back().frame == a.frame) {
      out.pop_back();
      continue;
    }
    out.push_back(a);
  }
  return out;
}

std::optional<std::vector<FrameId>> stackify(std::span<const StackAction> actions) {
  auto n = net(actions);
  std::vector<FrameId> stack;
  for (auto it = n.rbegin(); it != n.rend(); ++it) {
    if (it->kind != ActionKind::Push) return std::nullopt;
    stack.push_back(it->frame);
  }
  return stack;
}

IpdsOracle lift(RpdsOracle rpds) {
  IpdsOracle o;
  o.root = rpds.root;
  o.introspective = false;
  o.step = [f = std::move(rpds.stepTop)](StateId q, std::optional<FrameId> top, std::span<const FrameId>) {
    return f(q, top);
  };
  return o;
}

AbstractPds::AbstractPds(ProgramPtr program, Policy policy)
    : program_(std::move(program)), policy_(policy) {
  root_ = states_.intern(absInject(program_->root()).control());
}

std::vector<Transition> AbstractPds::intern(const std::vector<AbsTransition>& ts) {
  std::vector<Transition> out;
  out.reserve(ts.size());
  for (const auto& t : ts) {
    StackAction a = StackAction::eps();
    if (t.kind != ActionKind::Eps) a = {t.kind, frames_.intern(*t.frame)};
    out.push_back({a, states_.intern(t.next)});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Transition> AbstractPds::stepTop(StateId q, std::optional<FrameId> top) {
  ControlState s = states_.get(q);
  std::optional<AbsFrame> f;
  if (top) f = frames_.get(*top);
  return intern(stepControl(s, f ? &*f : nullptr, policy_));
}

std::vector<Transition> AbstractPds::stepIntro(StateId q, std::optional<FrameId> top,
                                               std::span<const FrameId> frames) {
  std::vector<AbsFrame> fs;
  fs.reserve(frames.size() + 1);
  for (FrameId id : frames) fs.push_back(frames_.get(id));
  std::optional<AbsFrame> f;
  if (top) {
    f = frames_.get(*top);
    fs.push_back(*f);
  }
  ControlState s = collectControl(states_.get(q), fs);
  return intern(stepControl(s, f ? &*f : nullptr, policy_));
}

RpdsOracle toRpds(std::shared_ptr<AbstractPds> pds) {
  RpdsOracle o;
  o.root = pds->root();
  o.stepTop = [pds](StateId q, std::optional<FrameId> top) { return pds->stepTop(q, top); };
  return o;
}

IpdsOracle toIpds(std::shared_ptr<AbstractPds> pds) {
  IpdsOracle o;
  o.root = pds->root();
  o.introspective = true;
  o.step = [pds](StateId q, std::optional<FrameId> top, std::span<const FrameId> frames) {
    return pds->stepIntro(q, top, frames);
  };
  return o;
}

}  // namespace pdcfa
