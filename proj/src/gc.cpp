#include "pdcfa/gc.hpp"

#include <algorithm>

namespace pdcfa {

namespace {

void normalize(AddrSet& s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

void addRange(AddrSet& out, const AbsEnv& env) {
  for (const auto& e : env.entries()) out.push_back(e.second);
}

}  // namespace

AddrSet stackRoot(std::span<const AbsFrame> frames) {
  AddrSet out;
  for (const auto& f : frames) addRange(out, f.env);
  normalize(out);
  return out;
}

AddrSet root(const AbsConf& c) {
  AddrSet out = stackRoot(c.kont);
  addRange(out, c.env);
  normalize(out);
  return out;
}

AddrSet adjacent(const AbsAddr& a, const AbsStore& store) {
  AddrSet out;
  if (const ValueSet* vs = store.find(a))
    for (const auto& v : *vs)
      if (auto clo = std::get_if<AbsClo>(&v)) addRange(out, clo->env);
  normalize(out);
  return out;
}

AddrSet reachableFrom(AddrSet roots, const AbsStore& store) {
  normalize(roots);
  AddrSet seen = roots;
  std::vector<AbsAddr> work(roots.begin(), roots.end());
  std::vector<AbsAddr> fresh;
  while (!work.empty()) {
    AbsAddr a = work.back();
    work.pop_back();
    const ValueSet* vs = store.find(a);
    if (!vs) continue;
    for (const auto& v : *vs) {
      auto clo = std::get_if<AbsClo>(&v);
      if (!clo) continue;
      for (const auto& [var, b] : clo->env.entries()) {
        auto it = std::lower_bound(seen.begin(), seen.end(), b);
        if (it != seen.end() && *it == b) continue;
        seen.insert(it, b);
        work.push_back(b);
      }
    }
  }
  return seen;
}

AddrSet reachableAddrs(const AbsConf& c) { return reachableFrom(root(c), c.store); }

AbsStore restrictStore(const AbsStore& store, const AddrSet& live) {
  return store.restricted([&](const AbsAddr& a) { return std::binary_search(live.begin(), live.end(), a); });
}

AbsConf collect(const AbsConf& c) {
  AbsConf out = c;
  out.store = restrictStore(c.store, reachableAddrs(c));
  return out;
}

std::vector<AbsConf> gcStep(const AbsConf& c, const Policy& policy) { return absStep(collect(c), policy); }

ControlState collectControl(const ControlState& q, std::span<const AbsFrame> frames) {
  AddrSet roots = stackRoot(frames);
  addRange(roots, q.env);
  ControlState out = q;
  out.store = restrictStore(q.store, reachableFrom(std::move(roots), q.store));
  return out;
}

}  // namespace pdcfa
