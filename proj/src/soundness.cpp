#include <map>
#include <set>
#include <sstream>

#include "pdcfa/analysis.hpp"

namespace pdcfa {

namespace {

// Addresses reachable from the environment and every frame of the stack.
std::vector<concrete::Addr> liveConcrete(const concrete::Conf& c) {
  std::set<concrete::Addr> seen;
  std::vector<concrete::Addr> work;
  auto addEnv = [&](const concrete::Env& env) {
    for (const auto& [v, a] : env.entries())
      if (seen.insert(a).second) work.push_back(a);
  };
  addEnv(c.env);
  for (const auto& f : c.kont.frames()) addEnv(f.env);
  while (!work.empty()) {
    concrete::Addr a = work.back();
    work.pop_back();
    if (const auto* clo = std::get_if<concrete::Closure>(&c.store.at(a))) addEnv(clo->env);
  }
  return {seen.begin(), seen.end()};
}

class AlphaStores {
 public:
  AlphaStores(const Policy& policy, bool gc) : policy_(policy), gc_(gc) {}

  AbsStore of(const concrete::Conf& c) {
    if (gc_) return alphaStore(c.store, liveConcrete(c), policy_);
    // Stores along one trace only grow, so the abstraction can be kept incrementally.
    if (c.store.size() < seen_) {
      acc_.clear();
      seen_ = 0;
    }
    for (; seen_ < c.store.size(); ++seen_) {
      auto a = static_cast<concrete::Addr>(seen_);
      auto& vs = acc_[alphaAddr(c.store.record(a), policy_)];
      AbsVal v = alphaValue(c.store.at(a), c.store, policy_);
      auto it = std::lower_bound(vs.begin(), vs.end(), v);
      if (it == vs.end() || !(*it == v)) vs.insert(it, std::move(v));
    }
    return AbsStore::fromEntries({acc_.begin(), acc_.end()});
  }

 private:
  Policy policy_;
  bool gc_;
  std::map<AbsAddr, ValueSet> acc_;
  std::size_t seen_ = 0;
};

class KontCheck {
 public:
  KontCheck(const KStore& ks, std::vector<AbsFrame> frames) : ks_(ks), frames_(std::move(frames)) {}

  bool representable(KAddr k, std::size_t i) {
    if (i == frames_.size()) return k == kHalt;
    if (k == kHalt) return false;
    if (failed_.count({k, i})) return false;
    if (const auto* es = ks_.find(k))
      for (const auto& e : *es)
        if (leq(frames_[i], e.frame) && representable(e.next, i + 1)) return true;
    failed_.insert({k, i});
    return false;
  }

 private:
  const KStore& ks_;
  std::vector<AbsFrame> frames_;
  std::set<std::pair<KAddr, std::size_t>> failed_;
};

struct Step {
  AbsEnv env;
  AbsStore store;
  History history;
  ActionKind kind = ActionKind::Eps;
  std::optional<AbsFrame> moved;
  std::vector<AbsFrame> frames;  // whole abstracted stack, top first
};

class TraceWalker {
 public:
  TraceWalker(const AnalysisRun& run, const concrete::RunRecord& trace)
      : run_(run), trace_(trace), policy_(run.report.config.policy), stores_(policy_, run.report.config.gc) {}

  Step at(std::size_t i) {
    const concrete::Conf& c = trace_.trace[i];
    Step s;
    s.env = alphaEnv(c.env, c.store, policy_);
    s.store = stores_.of(c);
    s.history = alphaHistory(c.history, policy_);
    if (run_.baseline)
      for (const auto& f : c.kont.frames()) s.frames.push_back(alphaFrame(f, c.store, policy_));
    if (i > 0) {
      const concrete::Conf& prev = trace_.trace[i - 1];
      if (c.kont.depth() > prev.kont.depth()) {
        s.kind = ActionKind::Push;
        s.moved = alphaFrame(c.kont.top(), c.store, policy_);
      } else if (c.kont.depth() < prev.kont.depth()) {
        s.kind = ActionKind::Pop;
        s.moved = alphaFrame(prev.kont.top(), prev.store, policy_);
      }
    }
    return s;
  }

  bool covers(StateId t, const concrete::Conf& c, const Step& s) const {
    if (run_.baseline) {
      const BaselineState& b = run_.baseline->state(t);
      if (b.exp != c.exp || b.history != s.history || !leq(s.env, b.env) || !leq(s.store, b.store)) return false;
      return KontCheck(b.kstore, s.frames).representable(b.kptr, 0);
    }
    const ControlState& q = run_.pds->state(t);
    return q.exp == c.exp && q.history == s.history && leq(s.env, q.env) && leq(s.store, q.store);
  }

  bool actionMatches(const StackAction& a, const Step& s) const {
    if (run_.baseline) return true;
    if (a.kind != s.kind) return false;
    return !s.moved || leq(*s.moved, run_.pds->frame(a.frame));
  }

  SoundnessResult fail(std::size_t i, const std::string& why) {
    SoundnessResult res;
    res.ok = false;
    res.failingStep = i;
    res.stepsChecked = i;
    res.concreteOutcome = trace_.outcome;
    std::ostringstream os;
    os << "step " << i << " at label " << trace_.trace[i].exp->label << ": " << why;
    res.message = os.str();
    return res;
  }

 private:
  const AnalysisRun& run_;
  const concrete::RunRecord& trace_;
  Policy policy_;
  AlphaStores stores_;
};

const char* kNoEdge = "no edge reaches a node covering the configuration";
const char* kNoRoot = "root does not cover the initial configuration";

}  // namespace

SoundnessResult checkSoundness(const AnalysisRun& run, const concrete::RunRecord& trace) {
  if (!run.report.complete()) return checkSoundnessOnDemand(run, trace);
  TraceWalker walk(run, trace);
  std::map<StateId, std::vector<const Edge*>> out;
  for (const auto& e : run.dsg.edges) out[e.from].push_back(&e);

  std::vector<StateId> cands;
  for (std::size_t i = 0; i < trace.trace.size(); ++i) {
    const concrete::Conf& c = trace.trace[i];
    Step s = walk.at(i);
    std::set<StateId> next;
    if (i == 0) {
      if (walk.covers(run.dsg.root, c, s)) next.insert(run.dsg.root);
    } else {
      for (StateId from : cands) {
        auto it = out.find(from);
        if (it == out.end()) continue;
        for (const Edge* e : it->second)
          if (!next.count(e->to) && walk.actionMatches(e->action, s) && walk.covers(e->to, c, s)) next.insert(e->to);
      }
    }
    if (next.empty()) return walk.fail(i, i == 0 ? kNoRoot : kNoEdge);
    cands.assign(next.begin(), next.end());
  }
  SoundnessResult res;
  res.stepsChecked = trace.trace.size();
  res.concreteOutcome = trace.outcome;
  return res;
}

SoundnessResult checkSoundnessOnDemand(const AnalysisRun& run, const concrete::RunRecord& trace) {
  TraceWalker walk(run, trace);
  // Configurations: a control state with the abstract stack it was reached with.
  using Cand = std::pair<StateId, std::vector<FrameId>>;
  std::set<Cand> cands;
  StateId root = run.pds ? run.pds->root() : run.baseline->root();

  for (std::size_t i = 0; i < trace.trace.size(); ++i) {
    const concrete::Conf& c = trace.trace[i];
    Step s = walk.at(i);
    std::set<Cand> next;
    if (i == 0) {
      if (walk.covers(root, c, s)) next.insert({root, {}});
    } else if (run.baseline) {
      for (const auto& [q, stack] : cands)
        for (StateId t : run.baseline->successors(q))
          if (walk.covers(t, c, s)) next.insert({t, {}});
    } else {
      for (const auto& [q, stack] : cands) {
        std::optional<FrameId> top;
        if (!stack.empty()) top = stack.front();
        std::vector<Transition> ts;
        if (run.report.config.gc) {
          FrameSet fs(stack.begin(), stack.end());
          std::sort(fs.begin(), fs.end());
          fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
          ts = run.pds->stepIntro(q, top, fs);
        } else {
          ts = run.pds->stepTop(q, top);
        }
        for (const auto& t : ts) {
          if (!walk.actionMatches(t.action, s) || !walk.covers(t.target, c, s)) continue;
          std::vector<FrameId> k = stack;
          if (t.action.kind == ActionKind::Push) k.insert(k.begin(), t.action.frame);
          if (t.action.kind == ActionKind::Pop) k.erase(k.begin());
          next.insert({t.target, std::move(k)});
        }
      }
    }
    if (next.empty()) return walk.fail(i, i == 0 ? kNoRoot : kNoEdge);
    cands = std::move(next);
  }
  SoundnessResult res;
  res.stepsChecked = trace.trace.size();
  res.concreteOutcome = trace.outcome;
  res.onDemand = true;
  return res;
}

SoundnessResult soundnessHarness(ProgramPtr p, const AnalysisConfig& cfg, std::size_t fuel) {
  auto trace = concrete::run(p->root(), fuel);
  auto run = runAnalysis(p, cfg);
  return checkSoundness(run, trace);
}

}  // namespace pdcfa
