#include "pdcfa/analysis.hpp"

#include <future>
#include <set>

namespace pdcfa {

std::string AnalysisConfig::key() const {
  std::string k;
  switch (policy.kind) {
    case Policy::Kind::Mono: k = "k0"; break;
    case Policy::Kind::OneCfa: k = "k1"; break;
    case Policy::Kind::KCfa: k = "k" + std::to_string(policy.k); break;
    case Policy::Kind::PolySplit: k = "poly"; break;
  }
  k += pushdown ? "-pdcfa" : "-cfa";
  if (gc) k += "-gc";
  return k;
}

std::vector<AnalysisConfig> gridConfigs(const SolveBounds& bounds) {
  std::vector<AnalysisConfig> out;
  for (unsigned k : {0u, 1u})
    for (bool gc : {false, true})
      for (bool pd : {false, true}) out.push_back({Policy::forGrid(k), pd, gc, bounds});
  return out;
}

ControlState AnalysisRun::control(StateId q) const {
  if (pds) return pds->state(q);
  return baseline->state(q).control();
}

std::string AnalysisRun::frameText(FrameId f) const {
  const AbsFrame& fr = pds->frame(f);
  return program->name(fr.binder) + "@" + std::to_string(fr.body->label);
}

namespace {

void insertLams(std::set<Label>& out, const ValueSet& vs) {
  for (const auto& v : vs)
    if (const auto* c = std::get_if<AbsClo>(&v)) out.insert(c->lam->label());
}

const Call* callAt(const Exp& e, Label& label) {
  if (const auto* c = e.asCall()) {
    label = e.label;
    return &c->call;
  }
  if (const auto* l = e.asLet()) {
    label = l->rhs->label;
    return &l->rhs->asCall()->call;
  }
  return nullptr;
}

}  // namespace

void summarizeFlows(AnalysisRun& run) {
  const Program& p = *run.program;
  AnalysisReport& r = run.report;
  r.states = run.dsg.nodes.size();
  r.edges = run.dsg.edges.size();

  std::map<VarId, std::set<Label>> flows;
  std::map<Label, std::set<Label>> calls;
  for (StateId q : run.dsg.nodes) {
    ControlState s = run.control(q);
    for (const auto& [addr, vs] : s.store.entries()) insertLams(flows[addr.var], vs);
    Label site = 0;
    if (const Call* c = callAt(*s.exp, site)) insertLams(calls[site], absAtomicEval(c->fn, s.env, s.store));
  }

  r.flowSets.clear();
  r.callFlows.clear();
  r.singletons = 0;
  for (VarId v : p.boundVariables()) {
    if (p.symbolKind(v) == SymbolKind::RecursionHelper) continue;
    const auto& ls = flows[v];
    r.flowSets[p.name(v)] = {ls.begin(), ls.end()};
    if (ls.size() == 1) ++r.singletons;
  }
  for (const auto& [site, ls] : calls) r.callFlows[site] = {ls.begin(), ls.end()};
}

AnalysisRun runAnalysis(ProgramPtr p, const AnalysisConfig& cfg, const std::string& name) {
  if (!cfg.pushdown) {
    auto run = finiteBaseline(p, cfg.policy, cfg.gc, cfg.bounds, name);
    run.report.config = cfg;
    return run;
  }
  auto t0 = std::chrono::steady_clock::now();
  AnalysisRun run;
  run.program = p;
  run.report.program = name;
  run.report.config = cfg;
  run.pds = std::make_shared<AbstractPds>(p, cfg.policy);
  IpdsOracle oracle = cfg.gc ? toIpds(run.pds) : lift(toRpds(run.pds));
  SummaryResult res = summarize(oracle, cfg.bounds);
  run.dsg = std::move(res.dsg);
  run.caches = std::move(res.caches);
  run.report.outcome = res.outcome;
  summarizeFlows(run);
  run.report.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
  return run;
}

AnalysisRun finiteBaseline(ProgramPtr p, const Policy& policy, bool gc, const SolveBounds& bounds,
                           const std::string& name) {
  auto t0 = std::chrono::steady_clock::now();
  AnalysisRun run;
  run.program = p;
  run.report.program = name;
  run.report.config = {policy, false, gc, bounds};
  run.baseline = std::make_shared<BaselineMachine>(p, policy, gc);
  SummaryResult res = summarize(toOracle(run.baseline), bounds);
  run.dsg = std::move(res.dsg);
  run.caches = std::move(res.caches);
  run.report.outcome = res.outcome;
  summarizeFlows(run);
  run.report.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
  return run;
}

std::vector<AnalysisReport> compareGrid(ProgramPtr p, const SolveBounds& bounds, const std::string& name,
                                        bool parallel) {
  auto cells = gridConfigs(bounds);
  std::vector<AnalysisReport> out;
  if (!parallel) {
    for (const auto& c : cells) out.push_back(runAnalysis(p, c, name).report);
    return out;
  }
  std::vector<std::future<AnalysisReport>> jobs;
  for (const auto& c : cells)
    jobs.push_back(std::async(std::launch::async, [p, c, name] { return runAnalysis(p, c, name).report; }));
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace pdcfa
