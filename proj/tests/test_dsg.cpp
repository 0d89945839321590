#include <doctest.h>

#include <deque>
#include <map>
#include <random>
#include <set>

#include "pdcfa/baseline.hpp"
#include "pdcfa/corpus.hpp"
#include "pdcfa/dsg.hpp"
#include "pdcfa/random.hpp"

using namespace pdcfa;

namespace {

// A hand-written IPDS. Pops fire only on a matching top; other rules may
// require a frame to be on the stack, or to be absent from it.
struct Rule {
  ActionKind kind;
  FrameId frame = 0;
  StateId to;
  std::optional<FrameId> need;
  std::optional<FrameId> forbid;
};
using Rules = std::map<StateId, std::vector<Rule>>;

std::vector<Transition> fire(const Rules& rules, StateId q, std::optional<FrameId> top, std::set<FrameId> frames) {
  if (top) frames.insert(*top);
  std::vector<Transition> out;
  auto it = rules.find(q);
  if (it == rules.end()) return out;
  for (const auto& r : it->second) {
    if (r.kind == ActionKind::Pop && top != r.frame) continue;
    if (r.need && !frames.count(*r.need)) continue;
    if (r.forbid && frames.count(*r.forbid)) continue;
    out.push_back({{r.kind, r.frame}, r.to});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

IpdsOracle handOracle(Rules rules, StateId root = 0) {
  IpdsOracle o;
  o.root = root;
  o.step = [rules = std::move(rules)](StateId q, std::optional<FrameId> top, std::span<const FrameId> fs) {
    return fire(rules, q, top, {fs.begin(), fs.end()});
  };
  return o;
}

Rule push(FrameId f, StateId to) { return {ActionKind::Push, f, to, {}, {}}; }
Rule pop(FrameId f, StateId to) { return {ActionKind::Pop, f, to, {}, {}}; }
Rule eps(StateId to) { return {ActionKind::Eps, 0, to, {}, {}}; }

// Ground truth by exploring configurations with explicit stacks.
struct Explicit {
  bool bounded = true;
  std::set<StateId> nodes;
  std::set<Edge> edges;
  std::map<StateId, std::set<std::vector<FrameId>>> stacks;  // top first
};

Explicit explore(const Rules& rules, StateId root, std::size_t maxDepth) {
  Explicit x;
  using Config = std::pair<StateId, std::vector<FrameId>>;
  std::set<Config> seen{{root, {}}};
  std::deque<Config> work{{root, {}}};
  while (!work.empty()) {
    auto [q, st] = work.front();
    work.pop_front();
    x.nodes.insert(q);
    x.stacks[q].insert(st);
    std::optional<FrameId> top;
    if (!st.empty()) top = st.front();
    for (const auto& t : fire(rules, q, top, {st.begin(), st.end()})) {
      auto next = st;
      if (t.action.kind == ActionKind::Push) next.insert(next.begin(), t.action.frame);
      if (t.action.kind == ActionKind::Pop) next.erase(next.begin());
      x.edges.insert({q, t.action, t.target});
      if (next.size() > maxDepth) {
        x.bounded = false;
        continue;
      }
      if (seen.insert({t.target, next}).second) work.emplace_back(t.target, std::move(next));
    }
  }
  return x;
}

Rules randomRules(std::mt19937_64& rng, StateId states, FrameId frames) {
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  Rules rules;
  for (StateId q = 0; q < states; ++q) {
    int n = pick(4);
    for (int i = 0; i < n; ++i) {
      Rule r;
      int k = pick(3);
      r.kind = k == 0 ? ActionKind::Eps : k == 1 ? ActionKind::Push : ActionKind::Pop;
      r.frame = r.kind == ActionKind::Eps ? 0 : static_cast<FrameId>(pick(static_cast<int>(frames)));
      r.to = static_cast<StateId>(pick(static_cast<int>(states)));
      int g = pick(6);
      if (g == 0) r.need = static_cast<FrameId>(pick(static_cast<int>(frames)));
      if (g == 1) r.forbid = static_cast<FrameId>(pick(static_cast<int>(frames)));
      rules[q].push_back(r);
    }
  }
  return rules;
}

// The graph-path reading of the fixed point, with explicit stacks: each round
// enumerates the stacks spelled by paths in the current graph and fires the
// rules on them. Only meaningful when those stacks stay shallow.
Explicit graphFixpoint(const Rules& rules, StateId root, std::size_t maxDepth) {
  Explicit g;
  g.nodes = {root};
  for (;;) {
    Explicit paths;
    using Config = std::pair<StateId, std::vector<FrameId>>;
    std::set<Config> seen{{root, {}}};
    std::deque<Config> work{{root, {}}};
    std::map<StateId, std::vector<const Edge*>> out;
    for (const auto& e : g.edges) out[e.from].push_back(&e);
    while (!work.empty()) {
      auto [q, st] = work.front();
      work.pop_front();
      paths.stacks[q].insert(st);
      for (const Edge* e : out[q]) {
        auto next = st;
        if (e->action.kind == ActionKind::Pop) {
          if (st.empty() || st.front() != e->action.frame) continue;
          next.erase(next.begin());
        }
        if (e->action.kind == ActionKind::Push) next.insert(next.begin(), e->action.frame);
        if (next.size() > maxDepth) {
          g.bounded = false;
          return g;
        }
        if (seen.insert({e->to, next}).second) work.emplace_back(e->to, std::move(next));
      }
    }
    std::size_t before = g.edges.size() + g.nodes.size();
    for (const auto& [q, stacks] : paths.stacks)
      for (const auto& st : stacks) {
        std::optional<FrameId> top;
        if (!st.empty()) top = st.front();
        for (const auto& t : fire(rules, q, top, {st.begin(), st.end()})) {
          g.edges.insert({q, t.action, t.target});
          g.nodes.insert(t.target);
        }
      }
    g.stacks = std::move(paths.stacks);
    if (g.edges.size() + g.nodes.size() == before) return g;
  }
}

std::set<StateId> nodesOf(const Dsg& g) { return {g.nodes.begin(), g.nodes.end()}; }
std::set<Edge> edgesOf(const Dsg& g) { return {g.edges.begin(), g.edges.end()}; }

SolveBounds smallBounds() {
  SolveBounds b;
  b.maxNodes = 10000;
  return b;
}

}  // namespace

TEST_CASE("push then pop gives three nodes and two edges") {
  auto o = handOracle({{0, {push(7, 1)}}, {1, {pop(7, 2)}}});
  auto naive = naiveSolve(o, smallBounds());
  auto sum = summarize(o, smallBounds());
  CHECK(naive.dsg == sum.dsg);
  CHECK(nodesOf(sum.dsg) == std::set<StateId>{0, 1, 2});
  CHECK(sum.dsg.edges.size() == 2);
  CHECK(sum.dsg.alphabet == std::vector<FrameId>{7});

  // Stacks at each node.
  using S = std::vector<std::vector<FrameId>>;
  CHECK(acceptedStacks(stacksNfa(sum.dsg, 0), 4) == S{{}});
  CHECK(acceptedStacks(stacksNfa(sum.dsg, 1), 4) == S{{7}});
  CHECK(acceptedStacks(stacksNfa(sum.dsg, 2), 4) == S{{}});
  CHECK(frameSetOf(sum.dsg, sum.caches, 0).empty());
  CHECK(frameSetOf(sum.dsg, sum.caches, 1) == FrameSet{7});
  CHECK(frameSetOf(sum.dsg, sum.caches, 2).empty());
  CHECK(frameSetOf(sum.dsg, NodeCaches{}, 1) == FrameSet{7});
  CHECK(sum.caches.topFrames(1) == FrameSet{7});
  CHECK(sum.caches.topFrames(2).empty());
  CHECK_THROWS_AS(stacksNfa(sum.dsg, 99), std::invalid_argument);
}

TEST_CASE("a pop at the root is not realizable") {
  auto o = handOracle({{0, {pop(1, 1)}}});
  auto sum = summarize(o, smallBounds());
  CHECK(nodesOf(sum.dsg) == std::set<StateId>{0});
  CHECK(sum.dsg.edges.empty());
  CHECK(naiveSolve(o, smallBounds()).dsg == sum.dsg);
}

TEST_CASE("a pop induces an implicit eps summary") {
  // q0 -push-> q -pop-> q' -eps-> q1
  auto o = handOracle({{0, {push(5, 1)}}, {1, {pop(5, 2)}}, {2, {eps(3)}}});
  auto sum = summarize(o, smallBounds());
  auto preds = sum.eps.predecessors(3);
  CHECK(std::find(preds.begin(), preds.end(), StateId{0}) != preds.end());
  CHECK(sum.dsg == naiveSolve(o, smallBounds()).dsg);
}

TEST_CASE("without pops, summaries are the transitive closure of eps edges") {
  std::mt19937_64 rng(42);
  for (int round = 0; round < 200; ++round) {
    Rules rules = randomRules(rng, 8, 2);
    for (auto& [q, rs] : rules)
      std::erase_if(rs, [](const Rule& r) { return r.kind == ActionKind::Pop; });
    auto o = handOracle(rules);
    auto sum = summarize(o, smallBounds());
    std::map<StateId, std::vector<StateId>> epsAdj;
    for (const auto& e : sum.dsg.edges)
      if (e.action.kind == ActionKind::Eps) epsAdj[e.from].push_back(e.to);
    for (StateId q : sum.dsg.nodes) {
      std::set<StateId> want;
      for (StateId s : sum.dsg.nodes) {
        // Non-empty eps paths from s.
        std::set<StateId> seen;
        std::vector<StateId> work(epsAdj[s].begin(), epsAdj[s].end());
        while (!work.empty()) {
          StateId x = work.back();
          work.pop_back();
          if (!seen.insert(x).second) continue;
          for (StateId y : epsAdj[x]) work.push_back(y);
        }
        if (seen.count(q)) want.insert(s);
      }
      auto got = sum.eps.predecessors(q);
      CHECK(std::set<StateId>(got.begin(), got.end()) == want);
    }
  }
}

TEST_CASE("random introspective systems against explicit stacks") {
  std::mt19937_64 rng(7);
  std::size_t exactCases = 0, pdsCases = 0, introspectionMattered = 0;
  for (int round = 0; round < 600; ++round) {
    Rules rules = randomRules(rng, 7, 3);
    auto o = handOracle(rules);
    auto naive = naiveSolve(o, smallBounds());
    auto sum = summarize(o, smallBounds());
    REQUIRE(naive.outcome == SolveOutcome::Complete);
    REQUIRE(sum.outcome == SolveOutcome::Complete);
    CHECK(naive.dsg == sum.dsg);
    CHECK(legalNodes(sum.dsg) == sum.dsg.nodes);
    std::size_t m = sum.dsg.nodes.size();
    CHECK(naive.rounds <= std::max<std::size_t>(1, sum.dsg.alphabet.size()) * m * m + 1);

    bool guarded = false;
    for (const auto& [q, rs] : rules)
      for (const auto& r : rs) guarded |= r.need || r.forbid;
    if (guarded) {
      auto blind = o;
      blind.introspective = false;
      if (!(summarize(blind, smallBounds()).dsg == sum.dsg)) ++introspectionMattered;
    }

    // Every run of the system with explicit stacks is in the graph.
    Explicit runs = explore(rules, 0, 6);
    if (runs.bounded) {
      auto nodes = nodesOf(sum.dsg);
      auto edges = edgesOf(sum.dsg);
      CHECK(std::includes(nodes.begin(), nodes.end(), runs.nodes.begin(), runs.nodes.end()));
      CHECK(std::includes(edges.begin(), edges.end(), runs.edges.begin(), runs.edges.end()));
      for (const auto& [s, stacks] : runs.stacks) {
        auto acc = acceptedStacks(stacksNfa(sum.dsg, s), 6);
        std::set<std::vector<FrameId>> accSet(acc.begin(), acc.end());
        CHECK(std::includes(accSet.begin(), accSet.end(), stacks.begin(), stacks.end()));
      }
    }

    // Exact agreement with the graph-path fixed point.
    Explicit x = graphFixpoint(rules, 0, 6);
    if (!x.bounded) continue;
    ++exactCases;
    CHECK(nodesOf(sum.dsg) == x.nodes);
    CHECK(edgesOf(sum.dsg) == x.edges);
    for (StateId s : sum.dsg.nodes) {
      const auto& stacks = x.stacks[s];
      auto acc = acceptedStacks(stacksNfa(sum.dsg, s), 6);
      CHECK(std::set<std::vector<FrameId>>(acc.begin(), acc.end()) == stacks);
      std::set<FrameId> tops, all;
      for (const auto& st : stacks) {
        if (!st.empty()) tops.insert(st.front());
        all.insert(st.begin(), st.end());
      }
      auto t = sum.caches.topFrames(s);
      CHECK(std::set<FrameId>(t.begin(), t.end()) == tops);
      auto f = frameSetOf(sum.dsg, sum.caches, s);
      CHECK(std::set<FrameId>(f.begin(), f.end()) == all);
      CHECK(frameSetOf(sum.dsg, NodeCaches{}, s) == f);
    }

    // With the guards removed it is an ordinary pushdown system, and the
    // graph is exactly the explicit runs.
    Rules plain = rules;
    for (auto& [q, rs] : plain)
      for (auto& r : rs) r.need = r.forbid = std::nullopt;
    Explicit pr = explore(plain, 0, 6);
    if (!pr.bounded) continue;
    ++pdsCases;
    auto ps = summarize(handOracle(plain), smallBounds());
    CHECK(nodesOf(ps.dsg) == pr.nodes);
    CHECK(edgesOf(ps.dsg) == pr.edges);
    for (StateId s : ps.dsg.nodes) {
      auto acc = acceptedStacks(stacksNfa(ps.dsg, s), 6);
      CHECK(std::set<std::vector<FrameId>>(acc.begin(), acc.end()) == pr.stacks[s]);
    }
  }
  CHECK(exactCases > 150);
  CHECK(pdsCases > 100);
  CHECK(introspectionMattered > 10);
}

TEST_CASE("fresh graph root accepts only the empty stack") {
  auto o = handOracle({});
  auto sum = summarize(o, smallBounds());
  CHECK(acceptedStacks(stacksNfa(sum.dsg, 0), 3) == std::vector<std::vector<FrameId>>{{}});
  CHECK(legalNodes(sum.dsg) == std::vector<StateId>{0});
}

TEST_CASE("node cap stops both solvers") {
  // An unbounded chain.
  IpdsOracle o;
  o.root = 0;
  o.step = [](StateId q, std::optional<FrameId>, std::span<const FrameId>) {
    return std::vector<Transition>{{StackAction::eps(), q + 1}};
  };
  SolveBounds b;
  b.maxNodes = 50;
  CHECK(summarize(o, b).outcome == SolveOutcome::NodeCapExceeded);
  CHECK(naiveSolve(o, b).outcome == SolveOutcome::NodeCapExceeded);
  b.maxNodes = 1000000;
  b.wallClock = std::chrono::milliseconds(50);
  CHECK(summarize(o, b).outcome == SolveOutcome::TimeExceeded);
}

TEST_CASE("summarize and naive agree on abstract machines with a shared interner") {
  SolveBounds b;
  b.maxNodes = 20000;
  auto agree = [&](ProgramPtr p, const std::string& what) {
    for (const Policy& pol : {Policy::mono(), Policy::oneCfa()}) {
      for (bool gc : {false, true}) {
        auto pds = std::make_shared<AbstractPds>(p, pol);
        IpdsOracle o = gc ? toIpds(pds) : lift(toRpds(pds));
        auto sum = summarize(o, b);
        auto naive = naiveSolve(o, b);
        CAPTURE(what);
        CAPTURE(gc);
        CHECK(sum.outcome == naive.outcome);
        if (sum.outcome == SolveOutcome::Complete) {
          CHECK(sum.dsg == naive.dsg);
          CHECK(legalNodes(sum.dsg) == sum.dsg.nodes);
        }
        auto m = std::make_shared<BaselineMachine>(p, pol, gc);
        auto bo = toOracle(m);
        auto bs = summarize(bo, b);
        auto bn = naiveSolve(bo, b);
        CHECK(bs.outcome == bn.outcome);
        if (bs.outcome == SolveOutcome::Complete) CHECK(bs.dsg == bn.dsg);
      }
    }
  };
  agree(loadBenchmark("mj09"), "mj09");
  agree(loadBenchmark("toy"), "toy");
  for (std::uint64_t seed = 1; seed <= 20; ++seed) agree(randomProgram(seed), "random " + std::to_string(seed));
}

TEST_CASE("balanced reach contains each entry's eps successors") {
  auto o = handOracle({{0, {push(1, 1), eps(3)}}, {1, {pop(1, 2)}}, {2, {eps(4)}}});
  auto sum = summarize(o, smallBounds());
  auto reach = balancedReach(sum.dsg);
  const auto& r0 = reach.at(0);
  for (StateId q : {2u, 3u, 4u}) CHECK(std::find(r0.begin(), r0.end(), q) != r0.end());
  CHECK(std::find(r0.begin(), r0.end(), StateId{1}) == r0.end());
}
