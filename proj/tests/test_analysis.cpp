#include <doctest.h>

#include <set>

#include "pdcfa/analysis.hpp"
#include "pdcfa/corpus.hpp"
#include "pdcfa/emit.hpp"
#include "pdcfa/random.hpp"

using namespace pdcfa;

namespace {

SolveBounds testBounds() {
  SolveBounds b;
  b.maxNodes = 60000;
  return b;
}

AnalysisConfig fused(unsigned k) { return {Policy::forGrid(k), true, true, testBounds()}; }

// Variables the singleton metric counts.
std::size_t countedVars(const Program& p) {
  std::size_t n = 0;
  for (VarId v : p.boundVariables())
    if (p.symbolKind(v) != SymbolKind::RecursionHelper) ++n;
  return n;
}

const Exp* letWithCall(const Program& p, const std::string& fn, const std::string& arg) {
  for (Label l = 0; l < p.labelCount(); ++l)
    if (const auto* let = p.exp(l).asLet()) {
      const auto& c = let->rhs->asCall()->call;
      const auto* f = std::get_if<VarRef>(&c.fn);
      if (!f || p.name(f->id) != fn || c.args.size() != 1) continue;
      const auto* a = std::get_if<VarRef>(&c.args[0]);
      if (a && p.name(a->id) == arg) return &p.exp(l);
    }
  return nullptr;
}

}  // namespace

TEST_CASE("grid configurations") {
  auto cells = gridConfigs({});
  REQUIRE(cells.size() == 8);
  std::vector<std::string> keys;
  for (const auto& c : cells) keys.push_back(c.key());
  CHECK(keys == std::vector<std::string>{"k0-cfa", "k0-pdcfa", "k0-cfa-gc", "k0-pdcfa-gc", "k1-cfa", "k1-pdcfa",
                                         "k1-cfa-gc", "k1-pdcfa-gc"});
}

TEST_CASE("identity program: every variable is a singleton") {
  auto p = compile("(let ((id (lambda (x) x))) (id id))");
  for (const auto& cfg : gridConfigs(testBounds())) {
    auto run = runAnalysis(p, cfg, "identity");
    CAPTURE(cfg.key());
    REQUIRE(run.report.complete());
    CHECK(run.report.singletons == countedVars(*p));
    CHECK(run.report.states > 0);
    CHECK(run.report.edges + 1 >= run.report.states);
  }
}

TEST_CASE("mj09 fused singletons") {
  auto run = runAnalysis(loadBenchmark("mj09"), fused(0), "mj09");
  REQUIRE(run.report.complete());
  CHECK(run.report.singletons == 4);
}

TEST_CASE("soundness on small programs under every configuration") {
  auto id = compile("(let ((id (lambda (x) x))) (id id))");
  auto toy = loadBenchmark("toy");
  for (const auto& cfg : gridConfigs(testBounds())) {
    CAPTURE(cfg.key());
    auto a = soundnessHarness(id, cfg, 1000);
    CHECK_MESSAGE(a.ok, a.message);
    auto b = soundnessHarness(toy, cfg, 100000);
    CHECK_MESSAGE(b.ok, b.message);
    CHECK(b.stepsChecked > 50);
    CHECK(b.concreteOutcome == concrete::Outcome::Final);
  }
}

TEST_CASE("soundness on generated programs") {
  std::size_t stuck = 0;
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    auto p = randomProgram(seed);
    for (const auto& cfg : gridConfigs(testBounds())) {
      auto r = soundnessHarness(p, cfg, 2000);
      CAPTURE(seed);
      CAPTURE(cfg.key());
      CHECK_MESSAGE(r.ok, r.message);
      if (r.concreteOutcome == concrete::Outcome::Stuck) ++stuck;
    }
  }
  // Stuck runs are checked up to the stuck state; some should occur.
  CHECK(stuck > 0);
}

TEST_CASE("a graph missing an edge is caught") {
  auto p = loadBenchmark("toy");
  auto run = runAnalysis(p, fused(0), "toy");
  REQUIRE(run.report.complete());
  auto trace = concrete::run(p->root(), 100000);
  REQUIRE(checkSoundness(run, trace).ok);

  std::size_t caught = 0;
  for (std::size_t i = 0; i < run.dsg.edges.size(); ++i) {
    AnalysisRun broken = run;
    broken.dsg.edges.erase(broken.dsg.edges.begin() + static_cast<long>(i));
    auto r = checkSoundness(broken, trace);
    if (!r.ok) {
      ++caught;
      CHECK(!r.message.empty());
      CHECK(r.failingStep < trace.trace.size());
    }
  }
  CHECK(caught > 0);

  // The root's only edge is taken by the very first step.
  AnalysisRun broken = run;
  std::erase_if(broken.dsg.edges, [&](const Edge& e) { return e.from == run.dsg.root; });
  auto r = checkSoundness(broken, trace);
  CHECK(!r.ok);
  CHECK(r.failingStep <= 1);
}

TEST_CASE("analysis is deterministic") {
  auto p = loadBenchmark("kcfa2");
  for (const auto& cfg : {fused(0), fused(1), AnalysisConfig{Policy::mono(), false, false, testBounds()}}) {
    auto a = runAnalysis(p, cfg, "kcfa2");
    auto b = runAnalysis(loadBenchmark("kcfa2"), cfg, "kcfa2");
    CHECK(a.report.states == b.report.states);
    CHECK(a.report.edges == b.report.edges);
    CHECK(a.report.flowSets == b.report.flowSets);
    CHECK(a.report.callFlows == b.report.callFlows);
    CHECK(renderDot(a) == renderDot(b));
  }
}

TEST_CASE("corpus relations") {
  for (const auto& name : corpusNames()) {
    auto cells = compareGrid(loadBenchmark(name), testBounds(), name);
    REQUIRE(cells.size() == 8);
    CAPTURE(name);
    for (std::size_t i = 0; i < 8; ++i) CHECK(cells[i].config.key() == gridConfigs({})[i].key());
    auto rel = relationalCheck(name, cells);
    CHECK(rel.violations.empty());

    // GC never loses singletons, checked here directly as well.
    // Per k the order is cfa, pdcfa, cfa-gc, pdcfa-gc.
    for (std::size_t i : {0, 1, 4, 5}) {
      if (!cells[i].complete() || !cells[i + 2].complete()) continue;
      CHECK(cells[i + 2].singletons >= cells[i].singletons);
    }
    // Fused flow sets sit inside the pushdown-only ones.
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& pd = cells[4 * k + 1];
      const auto& fu = cells[4 * k + 3];
      if (!pd.complete() || !fu.complete()) continue;
      for (const auto& [var, lams] : fu.flowSets) {
        auto it = pd.flowSets.find(var);
        REQUIRE(it != pd.flowSets.end());
        CHECK(std::includes(it->second.begin(), it->second.end(), lams.begin(), lams.end()));
      }
    }
  }
}

TEST_CASE("fused analysis on the toy program") {
  auto p = loadBenchmark("toy");
  auto cells = compareGrid(p, testBounds(), "toy");
  const auto& base = cells[0];
  const auto& pdOnly = cells[1];
  const auto& gcOnly = cells[2];
  const auto& both = cells[3];
  CHECK(both.states <= std::min(pdOnly.states, gcOnly.states));
  CHECK(pdOnly.states <= base.states);
  CHECK(gcOnly.states <= base.states);

  // The call of the result of (id g) only ever sees g's lambda.
  const Exp* idg = letWithCall(*p, "id", "g");
  REQUIRE(idg);
  VarId t = idg->asLet()->binder;
  std::optional<Label> site;
  for (Label l = 0; l < p->labelCount(); ++l)
    if (const auto* c = p->exp(l).asCall())
      if (const auto* f = std::get_if<VarRef>(&c->call.fn); f && f->id == t) site = l;
  REQUIRE(site);
  const Lam* gLam = nullptr;
  for (const Lam* lam : p->lambdas()) {
    if (lam->origin != LamOrigin::Source || lam->formals.size() != 1 || p->name(lam->formals[0]) != "n") continue;
    for (VarId v : freeVariables(*lam->body))
      if (p->name(v).rfind("g", 0) == 0) gLam = lam;
  }
  REQUIRE(gLam);
  REQUIRE(both.callFlows.count(*site));
  CHECK(both.callFlows.at(*site) == std::vector<Label>{gLam->label()});
  // Without the stack the return of id merges f and g.
  CHECK(base.callFlows.at(*site).size() == 2);
}

TEST_CASE("every node of every corpus graph is legal") {
  for (const auto& name : corpusNames()) {
    auto p = loadBenchmark(name);
    for (const auto& cfg : gridConfigs(testBounds())) {
      auto run = runAnalysis(p, cfg, name);
      if (!run.report.complete()) continue;
      CAPTURE(name);
      CAPTURE(cfg.key());
      CHECK(legalNodes(run.dsg) == run.dsg.nodes);
    }
  }
}
