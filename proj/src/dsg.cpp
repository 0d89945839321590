#include "pdcfa/dsg.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace pdcfa {

bool Dsg::hasNode(StateId q) const { return std::binary_search(nodes.begin(), nodes.end(), q); }

const char* outcomeName(SolveOutcome o) {
  switch (o) {
    case SolveOutcome::Complete:
      return "complete";
    case SolveOutcome::NodeCapExceeded:
      return "node-cap";
    case SolveOutcome::IterationCapExceeded:
      return "iteration-cap";
    case SolveOutcome::TimeExceeded:
      return "time-limit";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

StackProfile pushProfile(FrameId f, const StackProfile& d, bool introspective) {
  StackProfile out{f, {}};
  if (introspective) {
    out.frames = d.frames;
    auto it = std::lower_bound(out.frames.begin(), out.frames.end(), f);
    if (it == out.frames.end() || *it != f) out.frames.insert(it, f);
  }
  return out;
}

struct Adjacency {
  std::map<StateId, std::vector<StateId>> eps;
  std::map<StateId, std::vector<std::pair<FrameId, StateId>>> pushOut, pushIn, pops;

  explicit Adjacency(const Dsg& g) {
    for (const auto& e : g.edges) {
      switch (e.action.kind) {
        case ActionKind::Eps:
          eps[e.from].push_back(e.to);
          break;
        case ActionKind::Push:
          pushOut[e.from].emplace_back(e.action.frame, e.to);
          pushIn[e.to].emplace_back(e.action.frame, e.from);
          break;
        case ActionKind::Pop:
          pops[e.from].emplace_back(e.action.frame, e.to);
          break;
      }
    }
  }

  template <class M>
  static const typename M::mapped_type& at(const M& m, StateId q) {
    static const typename M::mapped_type empty;
    auto it = m.find(q);
    return it == m.end() ? empty : it->second;
  }
};

Dsg makeDsg(StateId root, const std::set<StateId>& nodes, const std::set<Edge>& edges) {
  Dsg g;
  g.root = root;
  g.nodes.assign(nodes.begin(), nodes.end());
  g.edges.assign(edges.begin(), edges.end());
  std::set<FrameId> alpha;
  for (const auto& e : edges)
    if (e.action.kind != ActionKind::Eps) alpha.insert(e.action.frame);
  g.alphabet.assign(alpha.begin(), alpha.end());
  return g;
}

// Realizable stack profiles per node, by walking the stacks automaton.
std::map<StateId, std::set<StackProfile>> profilesOf(const Dsg& g, const std::map<StateId, std::vector<StateId>>& reach,
                                                     bool introspective) {
  Adjacency adj(g);
  std::map<StateId, std::set<StackProfile>> out;
  std::deque<std::pair<StateId, StackProfile>> work;
  auto add = [&](StateId q, StackProfile d) {
    if (out[q].insert(d).second) work.emplace_back(q, std::move(d));
  };
  add(g.root, StackProfile{});
  while (!work.empty()) {
    auto [q, d] = std::move(work.front());
    work.pop_front();
    if (auto it = reach.find(q); it != reach.end())
      for (StateId y : it->second) add(y, d);
    for (const auto& [f, e] : Adjacency::at(adj.pushOut, q)) add(e, pushProfile(f, d, introspective));
  }
  return out;
}

}  // namespace

std::map<StateId, std::vector<StateId>> balancedReach(const Dsg& g) {
  Adjacency adj(g);
  std::map<StateId, std::set<StateId>> members, entriesOf;
  std::map<StateId, std::vector<StateId>> summaryOut;
  std::set<std::pair<StateId, StateId>> summaries;
  std::deque<std::pair<StateId, StateId>> work;

  auto add = [&](StateId e, StateId x) {
    if (members[e].insert(x).second) {
      entriesOf[x].insert(e);
      work.emplace_back(e, x);
    }
  };
  add(g.root, g.root);
  for (const auto& [p, outs] : adj.pushOut)
    for (const auto& [f, e] : outs) add(e, e);

  while (!work.empty()) {
    auto [e, x] = work.front();
    work.pop_front();
    for (StateId y : Adjacency::at(adj.eps, x)) add(e, y);
    for (StateId y : Adjacency::at(summaryOut, x)) add(e, y);
    for (const auto& [f, w] : Adjacency::at(adj.pops, x)) {
      for (const auto& [f2, p] : Adjacency::at(adj.pushIn, e)) {
        if (f2 != f || !summaries.emplace(p, w).second) continue;
        summaryOut[p].push_back(w);
        for (StateId e2 : std::vector<StateId>(entriesOf[p].begin(), entriesOf[p].end())) add(e2, w);
      }
    }
  }
  std::map<StateId, std::vector<StateId>> out;
  for (auto& [e, xs] : members) out[e].assign(xs.begin(), xs.end());
  return out;
}

NaiveResult naiveSolve(const IpdsOracle& oracle, const SolveBounds& bounds) {
  NaiveResult r;
  const auto start = Clock::now();
  std::set<StateId> nodes{oracle.root};
  std::set<Edge> edges;
  std::map<std::pair<StateId, StackProfile>, std::vector<Transition>> memo;

  for (;;) {
    if (r.rounds >= bounds.maxIters) {
      r.outcome = SolveOutcome::IterationCapExceeded;
      break;
    }
    ++r.rounds;
    Dsg g = makeDsg(oracle.root, nodes, edges);
    auto profiles = profilesOf(g, balancedReach(g), oracle.introspective);
    std::vector<Edge> fresh;
    bool timedOut = false;
    for (const auto& [q, ds] : profiles) {
      for (const auto& d : ds) {
        auto key = std::make_pair(q, d);
        auto it = memo.find(key);
        if (it == memo.end()) it = memo.emplace(key, oracle.step(q, d.top, d.frames)).first;
        for (const auto& t : it->second) {
          Edge e{q, t.action, t.target};
          if (!edges.count(e)) fresh.push_back(e);
        }
      }
      if (Clock::now() - start > bounds.wallClock) {
        timedOut = true;
        break;
      }
    }
    if (timedOut) {
      r.outcome = SolveOutcome::TimeExceeded;
      break;
    }
    if (fresh.empty()) break;
    for (const auto& e : fresh) {
      edges.insert(e);
      nodes.insert(e.to);
    }
    if (nodes.size() > bounds.maxNodes) {
      r.outcome = SolveOutcome::NodeCapExceeded;
      break;
    }
  }
  r.dsg = makeDsg(oracle.root, nodes, edges);
  return r;
}

// ---------------------------------------------------------------------------

EpsSummaries::EpsSummaries(std::vector<std::pair<StateId, StateId>> pairs) : pairs_(std::move(pairs)) {
  std::sort(pairs_.begin(), pairs_.end());
  pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
  for (const auto& [a, b] : pairs_) reverse_[b].push_back(a);
}

std::vector<StateId> EpsSummaries::predecessors(StateId q) const {
  std::set<StateId> seen;
  std::vector<StateId> work{q};
  while (!work.empty()) {
    StateId x = work.back();
    work.pop_back();
    auto it = reverse_.find(x);
    if (it == reverse_.end()) continue;
    for (StateId p : it->second)
      if (seen.insert(p).second) work.push_back(p);
  }
  return {seen.begin(), seen.end()};
}

void NodeCaches::add(StateId q, StackProfile p) {
  auto& v = profiles_[q];
  auto it = std::lower_bound(v.begin(), v.end(), p);
  if (it == v.end() || !(*it == p)) v.insert(it, std::move(p));
}

FrameSet NodeCaches::topFrames(StateId q) const {
  std::set<FrameId> out;
  if (auto v = profiles(q))
    for (const auto& p : *v)
      if (p.top) out.insert(*p.top);
  return {out.begin(), out.end()};
}

FrameSet NodeCaches::stackFrames(StateId q) const {
  std::set<FrameId> out;
  if (auto v = profiles(q))
    for (const auto& p : *v) {
      out.insert(p.frames.begin(), p.frames.end());
      if (p.top) out.insert(*p.top);
    }
  return {out.begin(), out.end()};
}

const std::vector<StackProfile>* NodeCaches::profiles(StateId q) const {
  auto it = profiles_.find(q);
  return it == profiles_.end() ? nullptr : &it->second;
}

std::size_t NodeCaches::profileCount() const {
  std::size_t n = 0;
  for (const auto& [q, v] : profiles_) n += v.size();
  return n;
}

// ---------------------------------------------------------------------------
// Worklist summarization.

namespace {

struct ProfileHash {
  std::size_t operator()(const StackProfile& p) const {
    std::size_t h = p.top ? *p.top + 1 : 0;
    for (FrameId f : p.frames) h = hashMix(h, f);
    return h;
  }
};

struct EdgeHash {
  std::size_t operator()(const Edge& e) const {
    return hashMix(hashMix(hashMix(e.from, e.to), static_cast<std::size_t>(e.action.kind)), e.action.frame);
  }
};

class Summarizer {
 public:
  Summarizer(const IpdsOracle& oracle, const SolveBounds& bounds, const std::function<void(const SummaryStats&)>& obs)
      : oracle_(oracle), bounds_(bounds), observer_(obs) {}

  SummaryResult run() {
    const auto start = Clock::now();
    std::uint32_t root = node(oracle_.root);
    enqueue({Fact::Reach, root, root, {}});
    enqueue({Fact::Profile, root, profileId(StackProfile{}), {}});
    SummaryResult r;
    while (!work_.empty() && r.outcome == SolveOutcome::Complete) {
      Fact f = work_.front();
      work_.pop_front();
      if (!process(f)) continue;
      ++r.steps;
      if (observer_) observer_(stats());
      if (nodes_.size() > bounds_.maxNodes) r.outcome = SolveOutcome::NodeCapExceeded;
      else if (r.steps >= bounds_.maxIters) r.outcome = SolveOutcome::IterationCapExceeded;
      else if ((r.steps & 255) == 0 && Clock::now() - start > bounds_.wallClock)
        r.outcome = SolveOutcome::TimeExceeded;
    }
    finish(r);
    return r;
  }

 private:
  struct Fact {
    enum Kind : std::uint8_t { Profile, Edge, Eps, Reach } kind;
    std::uint32_t a;
    std::uint32_t b;  // Edge: target StateId
    StackAction action;
  };

  struct NodeData {
    StateId id;
    std::vector<std::uint32_t> profiles;
    std::unordered_set<std::uint32_t> profileSet;
    std::vector<std::uint32_t> epsOut;
    std::vector<std::pair<FrameId, std::uint32_t>> pushOut, pushIn, popOut;
    std::vector<std::uint32_t> entriesOf;
    std::vector<std::uint32_t> members;  // when an entry
    std::unordered_set<std::uint32_t> memberSet;
  };

  const IpdsOracle& oracle_;
  const SolveBounds& bounds_;
  const std::function<void(const SummaryStats&)>& observer_;

  std::deque<Fact> work_;
  std::vector<NodeData> nodes_;
  std::unordered_map<StateId, std::uint32_t> index_;
  std::vector<StackProfile> profiles_;
  std::unordered_map<StackProfile, std::uint32_t, ProfileHash> profileIndex_;
  std::unordered_map<std::uint64_t, std::uint32_t> pushCache_;
  std::unordered_set<Edge, EdgeHash> edges_;
  std::unordered_set<std::uint64_t> eps_;
  std::size_t profileFacts_ = 0;

  static std::uint64_t pairKey(std::uint32_t a, std::uint32_t b) { return (std::uint64_t(a) << 32) | b; }

  void enqueue(Fact f) { work_.push_back(f); }

  std::uint32_t node(StateId q) {
    auto [it, fresh] = index_.emplace(q, static_cast<std::uint32_t>(nodes_.size()));
    if (fresh) {
      nodes_.emplace_back();
      nodes_.back().id = q;
    }
    return it->second;
  }

  std::uint32_t profileId(const StackProfile& p) {
    auto [it, fresh] = profileIndex_.emplace(p, static_cast<std::uint32_t>(profiles_.size()));
    if (fresh) profiles_.push_back(p);
    return it->second;
  }

  std::uint32_t pushed(FrameId f, std::uint32_t d) {
    auto key = pairKey(f, d);
    auto it = pushCache_.find(key);
    if (it != pushCache_.end()) return it->second;
    std::uint32_t id = profileId(pushProfile(f, profiles_[d], oracle_.introspective));
    pushCache_.emplace(key, id);
    return id;
  }

  bool process(const Fact& f) {
    switch (f.kind) {
      case Fact::Profile:
        return addProfile(f.a, f.b);
      case Fact::Edge:
        return addEdge(f.a, f.action, f.b);
      case Fact::Eps:
        return addEps(f.a, f.b);
      case Fact::Reach:
        return addReach(f.a, f.b);
    }
    return false;
  }

  bool addProfile(std::uint32_t n, std::uint32_t d) {
    if (!nodes_[n].profileSet.insert(d).second) return false;
    nodes_[n].profiles.push_back(d);
    ++profileFacts_;
    const StackProfile p = profiles_[d];
    for (const auto& t : oracle_.step(nodes_[n].id, p.top, p.frames)) enqueue({Fact::Edge, n, t.target, t.action});
    const NodeData& nd = nodes_[n];
    for (std::uint32_t m : nd.epsOut) enqueue({Fact::Profile, m, d, {}});
    for (const auto& [phi, m] : nd.pushOut) enqueue({Fact::Profile, m, pushed(phi, d), {}});
    return true;
  }

  bool addEdge(std::uint32_t a, StackAction act, StateId target) {
    if (!edges_.insert(Edge{nodes_[a].id, act, target}).second) return false;
    std::uint32_t b = node(target);
    switch (act.kind) {
      case ActionKind::Eps:
        enqueue({Fact::Eps, a, b, {}});
        break;
      case ActionKind::Push: {
        nodes_[a].pushOut.emplace_back(act.frame, b);
        nodes_[b].pushIn.emplace_back(act.frame, a);
        enqueue({Fact::Reach, b, b, {}});
        for (std::uint32_t d : nodes_[a].profiles) enqueue({Fact::Profile, b, pushed(act.frame, d), {}});
        for (std::uint32_t c : nodes_[b].members)
          for (const auto& [phi, w] : nodes_[c].popOut)
            if (phi == act.frame) enqueue({Fact::Eps, a, w, {}});
        break;
      }
      case ActionKind::Pop: {
        nodes_[a].popOut.emplace_back(act.frame, b);
        for (std::uint32_t e : nodes_[a].entriesOf)
          for (const auto& [phi, p] : nodes_[e].pushIn)
            if (phi == act.frame) enqueue({Fact::Eps, p, b, {}});
        break;
      }
    }
    return true;
  }

  bool addEps(std::uint32_t a, std::uint32_t b) {
    if (!eps_.insert(pairKey(a, b)).second) return false;
    nodes_[a].epsOut.push_back(b);
    for (std::uint32_t d : nodes_[a].profiles) enqueue({Fact::Profile, b, d, {}});
    for (std::uint32_t e : nodes_[a].entriesOf) enqueue({Fact::Reach, e, b, {}});
    return true;
  }

  bool addReach(std::uint32_t e, std::uint32_t x) {
    if (!nodes_[e].memberSet.insert(x).second) return false;
    nodes_[e].members.push_back(x);
    nodes_[x].entriesOf.push_back(e);
    for (std::uint32_t y : nodes_[x].epsOut) enqueue({Fact::Reach, e, y, {}});
    for (const auto& [phi, w] : nodes_[x].popOut)
      for (const auto& [phi2, p] : nodes_[e].pushIn)
        if (phi == phi2) enqueue({Fact::Eps, p, w, {}});
    return true;
  }

  SummaryStats stats() const {
    SummaryStats s;
    s.nodes = nodes_.size();
    s.edges = edges_.size();
    s.summaries = eps_.size();
    s.profiles = profileFacts_;
    return s;
  }

  void finish(SummaryResult& r) {
    std::set<StateId> nodes;
    for (const auto& n : nodes_) nodes.insert(n.id);
    std::set<Edge> edges(edges_.begin(), edges_.end());
    r.dsg = makeDsg(oracle_.root, nodes, edges);
    std::vector<std::pair<StateId, StateId>> pairs;
    for (std::uint64_t k : eps_)
      pairs.emplace_back(nodes_[k >> 32].id, nodes_[k & 0xffffffffu].id);
    r.eps = EpsSummaries(std::move(pairs));
    r.caches.setFramesTracked(oracle_.introspective);
    for (const auto& n : nodes_)
      for (std::uint32_t d : n.profiles) r.caches.add(n.id, profiles_[d]);
  }
};

}  // namespace

SummaryResult summarize(const IpdsOracle& oracle, const SolveBounds& bounds,
                        const std::function<void(const SummaryStats&)>& observer) {
  return Summarizer(oracle, bounds, observer).run();
}

// ---------------------------------------------------------------------------
// Stacks automaton

namespace {

std::vector<Nfa::Arc> automatonArcs(const Dsg& g) {
  std::set<Nfa::Arc> arcs;
  for (const auto& e : g.edges)
    if (e.action.kind == ActionKind::Push) arcs.insert({e.from, e.action.frame, e.to});
  for (const auto& [entry, xs] : balancedReach(g))
    for (StateId x : xs)
      if (x != entry) arcs.insert({entry, std::nullopt, x});
  return {arcs.begin(), arcs.end()};
}

}  // namespace

Nfa stacksNfa(const Dsg& g, StateId s) {
  if (!g.hasNode(s)) throw std::invalid_argument("node not in graph");
  Nfa n;
  n.states = g.nodes;
  n.alphabet = g.alphabet;
  n.transitions = automatonArcs(g);
  n.start = g.root;
  n.accepting = {s};
  return n;
}

std::vector<std::vector<FrameId>> acceptedStacks(const Nfa& nfa, std::size_t maxLen) {
  std::map<StateId, std::vector<const Nfa::Arc*>> out;
  for (const auto& a : nfa.transitions) out[a.from].push_back(&a);
  std::set<std::pair<StateId, std::vector<FrameId>>> seen;
  std::deque<std::pair<StateId, std::vector<FrameId>>> work;
  auto add = [&](StateId q, std::vector<FrameId> w) {
    if (seen.emplace(q, w).second) work.emplace_back(q, std::move(w));
  };
  add(nfa.start, {});
  std::set<std::vector<FrameId>> accepted;
  while (!work.empty()) {
    auto [q, w] = work.front();
    work.pop_front();
    if (std::find(nfa.accepting.begin(), nfa.accepting.end(), q) != nfa.accepting.end())
      accepted.insert(std::vector<FrameId>(w.rbegin(), w.rend()));
    for (const Nfa::Arc* a : out[q]) {
      if (!a->label) {
        add(a->to, w);
      } else if (w.size() < maxLen) {
        auto w2 = w;
        w2.push_back(*a->label);
        add(a->to, std::move(w2));
      }
    }
  }
  return {accepted.begin(), accepted.end()};
}

std::vector<StateId> legalNodes(const Dsg& g) {
  std::map<StateId, std::vector<StateId>> out;
  for (const auto& a : automatonArcs(g)) out[a.from].push_back(a.to);
  std::set<StateId> seen{g.root};
  std::vector<StateId> work{g.root};
  while (!work.empty()) {
    StateId q = work.back();
    work.pop_back();
    for (StateId n : out[q])
      if (seen.insert(n).second) work.push_back(n);
  }
  std::vector<StateId> legal;
  for (StateId q : g.nodes)
    if (seen.count(q)) legal.push_back(q);
  return legal;
}

FrameSet frameSetOf(const Dsg& g, const NodeCaches& caches, StateId s) {
  if (caches.framesTracked() && caches.has(s)) return caches.stackFrames(s);
  // A frame is on some stack at s when its push arc lies on a path from the
  // start to s in the stacks automaton.
  auto arcs = automatonArcs(g);
  std::map<StateId, std::vector<StateId>> fwd, bwd;
  for (const auto& a : arcs) {
    fwd[a.from].push_back(a.to);
    bwd[a.to].push_back(a.from);
  }
  auto closure = [](StateId from, std::map<StateId, std::vector<StateId>>& adj) {
    std::set<StateId> seen{from};
    std::vector<StateId> work{from};
    while (!work.empty()) {
      StateId q = work.back();
      work.pop_back();
      for (StateId n : adj[q])
        if (seen.insert(n).second) work.push_back(n);
    }
    return seen;
  };
  auto fromRoot = closure(g.root, fwd);
  auto toS = closure(s, bwd);
  std::set<FrameId> out;
  for (const auto& a : arcs)
    if (a.label && fromRoot.count(a.from) && toS.count(a.to)) out.insert(*a.label);
  return {out.begin(), out.end()};
}

}  // namespace pdcfa
