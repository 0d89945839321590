#include "pdcfa/emit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace pdcfa {

namespace {

std::string shortAtom(const Program& p, const Atom& a) {
  if (const auto* l = std::get_if<LamRef>(&a)) return "lam@" + std::to_string(l->lam->label());
  return atomText(p, a);
}

std::string callText(const Program& p, const Call& c) {
  std::string out = "(" + shortAtom(p, c.fn);
  for (const auto& a : c.args) out += " " + shortAtom(p, a);
  return out + ")";
}

std::string dotEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string expSummary(const Program& p, const Exp& e) {
  std::string body;
  if (const auto* l = e.asLet())
    body = "let " + p.name(l->binder) + " = " + callText(p, l->rhs->asCall()->call);
  else if (const auto* c = e.asCall())
    body = callText(p, c->call);
  else if (const auto* r = e.asReturn())
    body = "return " + shortAtom(p, r->atom);
  else
    body = "if " + shortAtom(p, e.asIf()->cond);
  return std::to_string(e.label) + ": " + body;
}

std::string actionText(const AnalysisRun& run, const StackAction& a) {
  switch (a.kind) {
    case ActionKind::Eps: return "eps";
    case ActionKind::Push: return "push:" + run.frameText(a.frame);
    case ActionKind::Pop: return "pop:" + run.frameText(a.frame);
  }
  return "eps";
}

std::string renderDot(const Dsg& g, const DotNames& names) {
  std::vector<StateId> order = g.nodes;
  if (names.before) std::stable_sort(order.begin(), order.end(), names.before);
  std::map<StateId, std::size_t> id;
  for (std::size_t i = 0; i < order.size(); ++i) id[order[i]] = i;

  auto edgeLabel = [&](const StackAction& a) -> std::string {
    switch (a.kind) {
      case ActionKind::Push: return "push:" + names.frame(a.frame);
      case ActionKind::Pop: return "pop:" + names.frame(a.frame);
      default: return "eps";
    }
  };
  struct Line {
    std::size_t from, to;
    std::string label;
    auto operator<=>(const Line&) const = default;
  };
  std::vector<Line> lines;
  for (const auto& e : g.edges) lines.push_back({id.at(e.from), id.at(e.to), edgeLabel(e.action)});
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());

  std::ostringstream os;
  os << "digraph dsg {\n";
  os << "  node [shape=box, fontname=\"monospace\"];\n";
  for (std::size_t i = 0; i < order.size(); ++i) {
    os << "  n" << i << " [label=\"" << dotEscape(names.node(order[i])) << "\"";
    if (order[i] == g.root) os << ", peripheries=2";
    os << "];\n";
  }
  for (const auto& l : lines)
    os << "  n" << l.from << " -> n" << l.to << " [label=\"" << dotEscape(l.label) << "\"];\n";
  os << "}\n";
  return os.str();
}

std::string renderDot(const AnalysisRun& run) {
  DotNames names;
  const Program& p = *run.program;
  names.node = [&](StateId q) { return expSummary(p, *run.control(q).exp); };
  names.frame = [&](FrameId f) { return run.frameText(f); };
  names.before = [&](StateId a, StateId b) {
    if (run.baseline) {
      const auto& x = run.baseline->state(a);
      const auto& y = run.baseline->state(b);
      if (auto c = x.control() <=> y.control(); c != 0) return c < 0;
      if (x.kptr != y.kptr) return x.kptr < y.kptr;
      return (x.kstore <=> y.kstore) < 0;
    }
    return run.pds->state(a) < run.pds->state(b);
  };
  return renderDot(run.dsg, names);
}

const char* outcomeKey(SolveOutcome o) { return o == SolveOutcome::Complete ? "complete" : "boundExceeded"; }

nlohmann::ordered_json reportJson(const AnalysisReport& r) {
  nlohmann::ordered_json j;
  j["program"] = r.program;
  j["config"] = {{"key", r.config.key()},
                 {"policy", r.config.policy.name()},
                 {"k", r.config.policy.k},
                 {"pushdown", r.config.pushdown},
                 {"gc", r.config.gc}};
  j["states"] = r.states;
  j["edges"] = r.edges;
  j["singletons"] = r.singletons;
  auto flows = nlohmann::ordered_json::array();
  for (const auto& [v, ls] : r.flowSets) flows.push_back({{"var", v}, {"lams", ls}});
  j["flowSets"] = std::move(flows);
  auto calls = nlohmann::ordered_json::array();
  for (const auto& [site, ls] : r.callFlows) calls.push_back({{"label", site}, {"lams", ls}});
  j["callFlows"] = std::move(calls);
  j["elapsedMs"] = r.elapsed.count();
  j["outcome"] = outcomeKey(r.outcome);
  if (!r.complete()) j["bound"] = outcomeName(r.outcome);
  return j;
}

nlohmann::ordered_json reportJson(const AnalysisRun& run, bool withGraph) {
  auto j = reportJson(run.report);
  if (!withGraph) return j;
  // Same canonical numbering as the DOT output.
  std::vector<StateId> order = run.dsg.nodes;
  const Program& p = *run.program;
  std::stable_sort(order.begin(), order.end(), [&](StateId a, StateId b) {
    if (run.baseline) {
      const auto& x = run.baseline->state(a);
      const auto& y = run.baseline->state(b);
      if (auto c = x.control() <=> y.control(); c != 0) return c < 0;
      if (x.kptr != y.kptr) return x.kptr < y.kptr;
      return (x.kstore <=> y.kstore) < 0;
    }
    return run.pds->state(a) < run.pds->state(b);
  });
  std::map<StateId, std::size_t> id;
  for (std::size_t i = 0; i < order.size(); ++i) id[order[i]] = i;
  auto nodes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < order.size(); ++i)
    nodes.push_back({{"id", i}, {"exp", expSummary(p, *run.control(order[i]).exp)}});
  std::vector<std::tuple<std::size_t, std::size_t, std::string>> es;
  for (const auto& e : run.dsg.edges) es.emplace_back(id.at(e.from), id.at(e.to), actionText(run, e.action));
  std::sort(es.begin(), es.end());
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [f, t, a] : es) edges.push_back({{"from", f}, {"to", t}, {"action", a}});
  j["graph"] = {{"root", id.at(run.dsg.root)}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
  return j;
}

nlohmann::ordered_json gridJson(const std::vector<AnalysisReport>& cells) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& r : cells) j[r.config.key()] = reportJson(r);
  return j;
}

std::string renderGridTable(const std::string& program, const std::vector<AnalysisReport>& cells) {
  std::ostringstream os;
  os << program << "\n";
  os << std::left << std::setw(14) << "config" << std::right << std::setw(9) << "states" << std::setw(9) << "edges"
     << std::setw(12) << "singletons" << std::setw(10) << "ms" << "  outcome\n";
  for (const auto& r : cells) {
    os << std::left << std::setw(14) << r.config.key() << std::right;
    if (r.complete())
      os << std::setw(9) << r.states;
    else
      os << std::setw(9) << ("> " + std::to_string(r.states));
    os << std::setw(9) << r.edges << std::setw(12) << r.singletons << std::setw(10) << r.elapsed.count() << "  "
       << outcomeKey(r.outcome) << "\n";
  }
  return os.str();
}

std::string renderCorpusTable(const std::vector<std::pair<std::string, std::vector<AnalysisReport>>>& rows) {
  auto cell = [](const AnalysisReport& r) {
    std::string s = r.complete() ? std::to_string(r.states) : "> " + std::to_string(r.states);
    return s + " / " + std::to_string(r.edges) + " / " + std::to_string(r.singletons);
  };
  std::ostringstream os;
  os << std::left << std::setw(10) << "program" << std::setw(3) << "k";
  for (const char* h : {"k-CFA", "k-PDCFA", "k-CFA+GC", "k-PDCFA+GC"}) os << std::setw(24) << h;
  os << "\n";
  for (const auto& [name, cells] : rows) {
    for (unsigned k : {0u, 1u}) {
      os << std::setw(10) << name << std::setw(3) << k;
      for (const auto& r : cells)
        if (r.config.policy.k == k) os << std::setw(24) << cell(r);
      os << "\n";
    }
  }
  return os.str();
}

void writeFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("cannot write " + path);
}

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("no such file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pdcfa
