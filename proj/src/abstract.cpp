#include "pdcfa/abstract.hpp"

#include <map>
#include <stdexcept>

namespace pdcfa {

Policy Policy::kCfa(unsigned k) {
  if (k > kMaxContext) throw std::invalid_argument("k-CFA supports k <= " + std::to_string(kMaxContext));
  return {Kind::KCfa, k};
}

Policy Policy::forGrid(unsigned k) {
  if (k == 0) return mono();
  if (k == 1) return oneCfa();
  return kCfa(k);
}

std::string Policy::name() const {
  switch (kind) {
    case Kind::Mono:
      return "mono";
    case Kind::OneCfa:
      return "1cfa";
    case Kind::PolySplit:
      return "poly";
    case Kind::KCfa:
      return "kcfa" + std::to_string(k);
  }
  return "?";
}

std::optional<Policy> parsePolicy(std::string_view name, unsigned k) {
  if (name == "mono" || name == "0cfa") return Policy::mono();
  if (name == "1cfa") return Policy::oneCfa();
  if (name == "poly") return Policy::polySplit();
  if (name == "kcfa") {
    if (k > kMaxContext) return std::nullopt;
    return Policy::kCfa(k);
  }
  return std::nullopt;
}

AbsAddr AbsAddr::ctxK(VarId v, std::span<const Label> ls) {
  AbsAddr a{v, AddrKind::CtxK, 0, {}};
  for (Label l : ls) {
    if (a.len == kMaxContext) break;
    a.ctx[a.len++] = l;
  }
  return a;
}

std::size_t hashOf(const AbsAddr& a) {
  std::size_t h = hashMix(a.var, static_cast<std::size_t>(a.kind) * 31 + a.len);
  for (Label l : a.context()) h = hashMix(h, l);
  return h;
}

std::string show(const Program& p, const AbsAddr& a) {
  std::string out = p.name(a.var);
  if (a.kind == AddrKind::Mono) return out;
  out += "@";
  for (std::size_t i = 0; i < a.len; ++i) {
    if (i) out += ",";
    out += std::to_string(a.ctx[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {
std::size_t hashEntries(std::span<const AbsEnv::Entry> es) {
  std::size_t h = es.size();
  for (const auto& [v, a] : es) h = hashMix(hashMix(h, v), hashOf(a));
  return h;
}
}  // namespace

const AbsAddr* AbsEnv::find(VarId v) const {
  if (!rep_) return nullptr;
  auto it = std::lower_bound(rep_->entries.begin(), rep_->entries.end(), v,
                             [](const Entry& e, VarId x) { return e.first < x; });
  return it != rep_->entries.end() && it->first == v ? &it->second : nullptr;
}

AbsEnv AbsEnv::extended(std::span<const Entry> bindings) const {
  std::vector<Entry> es = rep_ ? rep_->entries : std::vector<Entry>{};
  for (const auto& b : bindings) {
    auto it = std::lower_bound(es.begin(), es.end(), b.first, [](const Entry& e, VarId x) { return e.first < x; });
    if (it != es.end() && it->first == b.first)
      it->second = b.second;
    else
      es.insert(it, b);
  }
  AbsEnv out;
  if (!es.empty()) {
    std::size_t h = hashEntries(es);
    out.rep_ = std::make_shared<const Rep>(Rep{std::move(es), h});
  }
  return out;
}

AbsEnv AbsEnv::fromEntries(std::vector<Entry> entries) {
  return AbsEnv().extended(entries);
}

std::span<const AbsEnv::Entry> AbsEnv::entries() const {
  return rep_ ? std::span<const Entry>(rep_->entries) : std::span<const Entry>();
}

bool AbsEnv::operator==(const AbsEnv& o) const {
  if (rep_ == o.rep_) return true;
  if (hash() != o.hash() || size() != o.size()) return false;
  return rep_->entries == o.rep_->entries;
}

std::strong_ordering AbsEnv::operator<=>(const AbsEnv& o) const {
  if (rep_ == o.rep_) return std::strong_ordering::equal;
  auto a = entries(), b = o.entries();
  return std::lexicographical_compare_three_way(a.begin(), a.end(), b.begin(), b.end());
}

std::size_t hashOf(const AbsVal& v) {
  return std::visit(
      [](const auto& x) -> std::size_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, AbsClo>)
          return hashMix(x.lam->label(), x.env.hash());
        else if constexpr (std::is_same_v<T, AbsNum>)
          return 0x51;
        else if constexpr (std::is_same_v<T, AbsBool>)
          return 0x52;
        else
          return 0x60 + static_cast<std::size_t>(x.op);
      },
      v);
}

std::string show(const Program& p, const AbsVal& v) {
  return std::visit(
      [&](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, AbsClo>) {
          std::string out = "(lambda@" + std::to_string(x.lam->label()) + " {";
          bool first = true;
          for (const auto& [var, a] : x.env.entries()) {
            if (!first) out += " ";
            first = false;
            out += p.name(var) + ":" + show(p, a);
          }
          return out + "})";
        } else if constexpr (std::is_same_v<T, AbsNum>) {
          return "num";
        } else if constexpr (std::is_same_v<T, AbsBool>) {
          return "bool";
        } else {
          return std::string(primName(x.op));
        }
      },
      v);
}

std::size_t hashOf(const AbsFrame& f) { return hashMix(hashMix(f.body->label, f.binder), f.env.hash()); }

std::size_t hashOf(const ControlState& q) {
  std::size_t h = hashMix(hashMix(q.exp->label, q.env.hash()), q.store.hash());
  for (Label l : q.history) h = hashMix(h, l);
  return h;
}

// ---------------------------------------------------------------------------

AbsConf absInject(const Exp& e) { return AbsConf{&e, AbsEnv{}, AbsStore{}, {}, {}}; }

ValueSet absAtomicEval(const Atom& a, const AbsEnv& env, const AbsStore& store) {
  return std::visit(
      [&](const auto& x) -> ValueSet {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, VarRef>) {
          const AbsAddr* addr = env.find(x.id);
          if (!addr) throw std::logic_error("unbound variable in abstract evaluation");
          const ValueSet* vs = store.find(*addr);
          return vs ? *vs : ValueSet{};
        } else if constexpr (std::is_same_v<T, LamRef>) {
          return {AbsClo{x.lam, env}};
        } else if constexpr (std::is_same_v<T, IntLit>) {
          return {AbsNum{}};
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          return {AbsBool{}};
        } else {
          return {AbsPrim{x.op}};
        }
      },
      a);
}

AbsAddr allocAbs(VarId v, Label site, std::optional<Label> splitSite, const History& history,
                 const Policy& policy) {
  switch (policy.kind) {
    case Policy::Kind::Mono:
      return AbsAddr::mono(v);
    case Policy::Kind::OneCfa:
      return AbsAddr::ctx1(v, site);
    case Policy::Kind::PolySplit:
      return AbsAddr::poly(v, splitSite);
    case Policy::Kind::KCfa: {
      std::array<Label, kMaxContext> ctx{};
      std::size_t n = 0;
      if (policy.k > 0) ctx[n++] = site;
      for (std::size_t i = 0; i < history.size() && n < policy.k; ++i) ctx[n++] = history[i];
      return AbsAddr::ctxK(v, std::span<const Label>(ctx.data(), n));
    }
  }
  return AbsAddr::mono(v);
}

AbsStore storeJoin(const AbsStore& a, const AbsStore& b) { return a.joined(b); }

namespace {

bool hasNum(const ValueSet& vs) {
  return std::any_of(vs.begin(), vs.end(), [](const AbsVal& v) { return std::holds_alternative<AbsNum>(v); });
}
bool hasBool(const ValueSet& vs) {
  return std::any_of(vs.begin(), vs.end(), [](const AbsVal& v) { return std::holds_alternative<AbsBool>(v); });
}

std::optional<ValueSet> primResult(PrimOp op, const std::vector<ValueSet>& args) {
  if (static_cast<int>(args.size()) != primArity(op)) return std::nullopt;
  if (op == PrimOp::Print) return args[0];
  if (!hasNum(args[0]) || !hasNum(args[1])) return std::nullopt;
  if (op == PrimOp::Le || op == PrimOp::Eq) return ValueSet{AbsBool{}};
  return ValueSet{AbsNum{}};
}

History nextHistory(const ControlState& q, const Policy& policy) {
  std::size_t depth = policy.historyDepth();
  History h;
  if (depth == 0) return h;
  h.push_back(q.exp->label);
  for (std::size_t i = 0; i < q.history.size() && h.size() < depth; ++i) h.push_back(q.history[i]);
  return h;
}

ControlState bindReturn(const ControlState& q, const AbsFrame& f, const ValueSet& vs, const Policy& policy) {
  AbsAddr a = allocAbs(f.binder, q.exp->label, std::nullopt, q.history, policy);
  AbsEnv::Entry b{f.binder, a};
  return ControlState{f.body, f.env.extended({&b, 1}), q.store.joined(a, vs), nextHistory(q, policy)};
}

}  // namespace

std::vector<AbsTransition> stepControl(const ControlState& q, const AbsFrame* top, const Policy& policy) {
  std::vector<AbsTransition> out;
  const Exp& e = *q.exp;

  if (auto r = e.asReturn()) {
    if (!top) return out;
    ValueSet vs = absAtomicEval(r->atom, q.env, q.store);
    if (vs.empty()) return out;
    out.push_back({ActionKind::Pop, *top, bindReturn(q, *top, vs, policy)});
    return out;
  }
  if (auto f = e.asIf()) {
    if (!hasBool(absAtomicEval(f->cond, q.env, q.store))) return out;
    History h = nextHistory(q, policy);
    out.push_back({ActionKind::Eps, std::nullopt, ControlState{f->thenBranch, q.env, q.store, h}});
    out.push_back({ActionKind::Eps, std::nullopt, ControlState{f->elseBranch, q.env, q.store, h}});
    return out;
  }

  const LetForm* let = e.asLet();
  const Call& call = let ? let->rhs->asCall()->call : e.asCall()->call;
  std::vector<ValueSet> args;
  for (const auto& a : call.args) {
    args.push_back(absAtomicEval(a, q.env, q.store));
    if (args.back().empty()) return out;
  }
  History h = nextHistory(q, policy);

  for (const AbsVal& fn : absAtomicEval(call.fn, q.env, q.store)) {
    if (auto clo = std::get_if<AbsClo>(&fn)) {
      const Lam& lam = *clo->lam;
      if (lam.formals.size() != args.size()) continue;
      std::optional<Label> split;
      if (lam.letBound) split = e.label;
      std::vector<AbsEnv::Entry> bindings;
      AbsStore store = q.store;
      for (std::size_t i = 0; i < args.size(); ++i) {
        AbsAddr a = allocAbs(lam.formals[i], e.label, split, q.history, policy);
        bindings.emplace_back(lam.formals[i], a);
        store = store.joined(a, args[i]);
      }
      ControlState next{lam.body, clo->env.extended(bindings), std::move(store), h};
      if (let)
        out.push_back({ActionKind::Push, AbsFrame{let->binder, let->body, q.env}, std::move(next)});
      else
        out.push_back({ActionKind::Eps, std::nullopt, std::move(next)});
    } else if (auto prim = std::get_if<AbsPrim>(&fn)) {
      auto result = primResult(prim->op, args);
      if (!result || result->empty()) continue;
      if (let) {
        AbsFrame here{let->binder, let->body, q.env};
        out.push_back({ActionKind::Eps, std::nullopt, bindReturn(q, here, *result, policy)});
      } else if (top) {
        out.push_back({ActionKind::Pop, *top, bindReturn(q, *top, *result, policy)});
      }
    }
  }
  return out;
}

std::vector<AbsConf> absStep(const AbsConf& c, const Policy& policy) {
  std::vector<AbsConf> out;
  const AbsFrame* top = c.kont.empty() ? nullptr : &c.kont.front();
  for (auto& t : stepControl(c.control(), top, policy)) {
    AbsKont k = c.kont;
    if (t.kind == ActionKind::Push)
      k.insert(k.begin(), *t.frame);
    else if (t.kind == ActionKind::Pop)
      k.erase(k.begin());
    out.push_back(AbsConf{t.next.exp, std::move(t.next.env), std::move(t.next.store), std::move(k),
                          std::move(t.next.history)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orders

bool leq(const AbsEnv& a, const AbsEnv& b) {
  for (const auto& [v, addr] : a.entries()) {
    const AbsAddr* other = b.find(v);
    if (!other || !(*other == addr)) return false;
  }
  return true;
}

bool leq(const AbsVal& a, const AbsVal& b) {
  if (a.index() != b.index()) return false;
  if (auto x = std::get_if<AbsClo>(&a)) {
    const auto& y = std::get<AbsClo>(b);
    return x->lam == y.lam && leq(x->env, y.env);
  }
  return a == b;
}

bool leq(const ValueSet& a, const ValueSet& b) {
  for (const auto& x : a) {
    if (std::binary_search(b.begin(), b.end(), x)) continue;
    if (!std::any_of(b.begin(), b.end(), [&](const AbsVal& y) { return leq(x, y); })) return false;
  }
  return true;
}

bool leq(const AbsStore& a, const AbsStore& b) {
  for (const auto& [addr, vs] : a.entries()) {
    const ValueSet* other = b.find(addr);
    if (!other || !leq(vs, *other)) return false;
  }
  return true;
}

bool leq(const AbsFrame& a, const AbsFrame& b) {
  return a.binder == b.binder && a.body == b.body && leq(a.env, b.env);
}

bool leq(const AbsKont& a, const AbsKont& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!leq(a[i], b[i])) return false;
  return true;
}

bool leq(const AbsConf& a, const AbsConf& b) {
  return a.exp == b.exp && a.history == b.history && leq(a.env, b.env) && leq(a.store, b.store) &&
         leq(a.kont, b.kont);
}

// ---------------------------------------------------------------------------
// Abstraction

AbsAddr alphaAddr(const concrete::AllocRecord& r, const Policy& policy) {
  return allocAbs(r.var, r.site, r.splitSite, r.history, policy);
}

AbsEnv alphaEnv(const concrete::Env& env, const concrete::Store& store, const Policy& policy) {
  std::vector<AbsEnv::Entry> es;
  for (const auto& [v, a] : env.entries()) es.emplace_back(v, alphaAddr(store.record(a), policy));
  return AbsEnv::fromEntries(std::move(es));
}

AbsVal alphaValue(const concrete::Value& v, const concrete::Store& store, const Policy& policy) {
  return std::visit(
      [&](const auto& x) -> AbsVal {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, concrete::Closure>)
          return AbsClo{x.lam, alphaEnv(x.env, store, policy)};
        else if constexpr (std::is_same_v<T, concrete::Num>)
          return AbsNum{};
        else if constexpr (std::is_same_v<T, concrete::Bool>)
          return AbsBool{};
        else
          return AbsPrim{x.op};
      },
      v);
}

AbsFrame alphaFrame(const concrete::Frame& f, const concrete::Store& store, const Policy& policy) {
  return AbsFrame{f.binder, f.body, alphaEnv(f.env, store, policy)};
}

AbsStore alphaStore(const concrete::Store& store, const std::vector<concrete::Addr>& live, const Policy& policy) {
  std::map<AbsAddr, ValueSet> m;
  for (concrete::Addr a : live) {
    auto& vs = m[alphaAddr(store.record(a), policy)];
    AbsVal v = alphaValue(store.at(a), store, policy);
    auto it = std::lower_bound(vs.begin(), vs.end(), v);
    if (it == vs.end() || !(*it == v)) vs.insert(it, std::move(v));
  }
  std::vector<AbsStore::Entry> es(m.begin(), m.end());
  return AbsStore::fromEntries(std::move(es));
}

AbsStore alphaStore(const concrete::Store& store, const Policy& policy) {
  std::vector<concrete::Addr> all(store.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<concrete::Addr>(i);
  return alphaStore(store, all, policy);
}

History alphaHistory(const std::vector<Label>& history, const Policy& policy) {
  std::size_t n = std::min(history.size(), policy.historyDepth());
  return History(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(n));
}

AbsConf alpha(const concrete::Conf& c, const Policy& policy) {
  AbsKont k;
  for (const auto& f : c.kont.frames()) k.push_back(alphaFrame(f, c.store, policy));
  return AbsConf{c.exp, alphaEnv(c.env, c.store, policy), alphaStore(c.store, policy), std::move(k),
                 alphaHistory(c.history, policy)};
}

}  // namespace pdcfa
