#include "pdcfa/concrete.hpp"

#include <algorithm>
#include <ostream>

namespace pdcfa::concrete {

std::optional<Addr> Env::find(VarId v) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), v,
                             [](const auto& e, VarId x) { return e.first < x; });
  if (it != entries_.end() && it->first == v) return it->second;
  return std::nullopt;
}

Env Env::extended(const std::vector<VarId>& vars, const std::vector<Addr>& addrs) const {
  Env out = *this;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    auto it = std::lower_bound(out.entries_.begin(), out.entries_.end(), vars[i],
                               [](const auto& e, VarId x) { return e.first < x; });
    if (it != out.entries_.end() && it->first == vars[i])
      it->second = addrs[i];
    else
      out.entries_.insert(it, {vars[i], addrs[i]});
  }
  return out;
}

std::string show(const Program&, const Value& v) {
  return std::visit(
      [&](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Closure>)
          return "#<closure " + std::to_string(x.lam->label()) + ">";
        else if constexpr (std::is_same_v<T, Num>)
          return std::to_string(x.value);
        else if constexpr (std::is_same_v<T, Bool>)
          return x.value ? "#t" : "#f";
        else
          return "#<primitive " + std::string(primName(x.op)) + ">";
      },
      v);
}

Store::Store() : data_(std::make_shared<Data>()) {}

const Value& Store::at(Addr a) const {
  if (a >= size_) throw MachineError("dangling address " + std::to_string(a));
  return data_->values[a];
}

const AllocRecord& Store::record(Addr a) const {
  if (a >= size_) throw MachineError("dangling address " + std::to_string(a));
  return data_->records[a];
}

Store Store::extended(Value v, AllocRecord r) const {
  Store out;
  if (data_->values.size() == size_) {
    out.data_ = data_;
  } else {
    out.data_ = std::make_shared<Data>();
    out.data_->values.assign(data_->values.begin(), data_->values.begin() + size_);
    out.data_->records.assign(data_->records.begin(), data_->records.begin() + size_);
  }
  out.data_->values.push_back(std::move(v));
  out.data_->records.push_back(std::move(r));
  out.size_ = size_ + 1;
  return out;
}

Kont Kont::push(Frame f) const {
  return Kont(std::make_shared<const Node>(Node{std::move(f), node_, depth() + 1}));
}

std::vector<Frame> Kont::frames() const {
  std::vector<Frame> out;
  for (auto n = node_; n; n = n->next) out.push_back(n->frame);
  return out;
}

Conf inject(const Exp& e) { return Conf{&e, Env{}, Store{}, Kont{}, {}}; }

Value atomicEval(const Atom& a, const Env& env, const Store& store) {
  return std::visit(
      [&](const auto& x) -> Value {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, VarRef>) {
          auto addr = env.find(x.id);
          if (!addr) throw MachineError("unbound variable");
          return store.at(*addr);
        } else if constexpr (std::is_same_v<T, LamRef>) {
          return Closure{x.lam, env};
        } else if constexpr (std::is_same_v<T, IntLit>) {
          return Num{x.value};
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          return Bool{x.value};
        } else {
          return PrimVal{x.op};
        }
      },
      a);
}

Addr alloc(VarId, const Conf& c) { return static_cast<Addr>(c.store.size()); }

namespace {

std::vector<Label> nextHistory(const Conf& c) {
  std::vector<Label> h;
  h.reserve(kHistoryDepth);
  h.push_back(c.exp->label);
  for (std::size_t i = 0; i < c.history.size() && h.size() < kHistoryDepth; ++i) h.push_back(c.history[i]);
  return h;
}

std::int64_t wrap(std::uint64_t x) { return static_cast<std::int64_t>(x); }

Value applyPrim(PrimOp op, const std::vector<Value>& args, std::vector<Value>* output) {
  if (static_cast<int>(args.size()) != primArity(op))
    throw MachineError("arity mismatch applying " + std::string(primName(op)));
  if (op == PrimOp::Print) {
    if (output) output->push_back(args[0]);
    return args[0];
  }
  auto num = [&](std::size_t i) {
    auto n = std::get_if<Num>(&args[i]);
    if (!n) throw MachineError(std::string(primName(op)) + " expects numbers");
    return n->value;
  };
  std::uint64_t a = static_cast<std::uint64_t>(num(0));
  std::uint64_t b = static_cast<std::uint64_t>(num(1));
  switch (op) {
    case PrimOp::Add:
      return Num{wrap(a + b)};
    case PrimOp::Sub:
      return Num{wrap(a - b)};
    case PrimOp::Mul:
      return Num{wrap(a * b)};
    case PrimOp::Le:
      return Bool{num(0) <= num(1)};
    case PrimOp::Eq:
      return Bool{num(0) == num(1)};
    default:
      throw MachineError("unknown primitive");
  }
}

// Bind vars to vals at fresh addresses.
std::pair<Env, Store> bindAll(const Conf& c, const Env& base, Store store, const std::vector<VarId>& vars,
                              const std::vector<Value>& vals, std::optional<Label> splitSite) {
  std::vector<Addr> addrs;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    addrs.push_back(static_cast<Addr>(store.size()));
    store = store.extended(vals[i], AllocRecord{vars[i], c.exp->label, splitSite, c.history});
  }
  return {base.extended(vars, addrs), std::move(store)};
}

// Return value to the frame on top of kont.
Conf returnTo(const Conf& c, const Value& v) {
  const Frame& f = c.kont.top();
  auto [env, store] = bindAll(c, f.env, c.store, {f.binder}, {v}, std::nullopt);
  return Conf{f.body, std::move(env), std::move(store), c.kont.pop(), nextHistory(c)};
}

}  // namespace

std::optional<Conf> step(const Conf& c, std::vector<Value>* output) {
  const Exp& e = *c.exp;
  if (auto r = e.asReturn()) {
    if (c.kont.empty()) return std::nullopt;
    return returnTo(c, atomicEval(r->atom, c.env, c.store));
  }
  if (auto f = e.asIf()) {
    Value v = atomicEval(f->cond, c.env, c.store);
    auto b = std::get_if<Bool>(&v);
    if (!b) throw MachineError("if on non-boolean");
    return Conf{b->value ? f->thenBranch : f->elseBranch, c.env, c.store, c.kont, nextHistory(c)};
  }

  const LetForm* let = e.asLet();
  const Call& call = let ? let->rhs->asCall()->call : e.asCall()->call;
  Value fn = atomicEval(call.fn, c.env, c.store);
  std::vector<Value> args;
  for (const auto& a : call.args) args.push_back(atomicEval(a, c.env, c.store));

  if (auto prim = std::get_if<PrimVal>(&fn)) {
    Value result = applyPrim(prim->op, args, output);
    if (let) {
      auto [env, store] = bindAll(c, c.env, c.store, {let->binder}, {result}, std::nullopt);
      return Conf{let->body, std::move(env), std::move(store), c.kont, nextHistory(c)};
    }
    if (c.kont.empty()) return std::nullopt;
    return returnTo(c, result);
  }
  auto clo = std::get_if<Closure>(&fn);
  if (!clo) throw MachineError("applying a non-procedure");
  if (clo->lam->formals.size() != args.size()) throw MachineError("arity mismatch");
  std::optional<Label> split;
  if (clo->lam->letBound) split = e.label;
  auto [env, store] = bindAll(c, clo->env, c.store, clo->lam->formals, args, split);
  Kont k = let ? c.kont.push(Frame{let->binder, let->body, c.env}) : c.kont;
  return Conf{clo->lam->body, std::move(env), std::move(store), std::move(k), nextHistory(c)};
}

std::optional<Value> finalValue(const Conf& c) {
  if (!c.kont.empty()) return std::nullopt;
  if (auto r = c.exp->asReturn()) return atomicEval(r->atom, c.env, c.store);
  if (auto call = c.exp->asCall()) {
    Value fn = atomicEval(call->call.fn, c.env, c.store);
    if (auto prim = std::get_if<PrimVal>(&fn)) {
      std::vector<Value> args;
      for (const auto& a : call->call.args) args.push_back(atomicEval(a, c.env, c.store));
      return applyPrim(prim->op, args, nullptr);
    }
  }
  return std::nullopt;
}

RunRecord run(const Exp& e, std::size_t fuel) {
  RunRecord r;
  r.trace.push_back(inject(e));
  for (;;) {
    std::optional<Conf> next;
    try {
      next = step(r.trace.back(), &r.output);
    } catch (const MachineError& err) {
      r.outcome = Outcome::Stuck;
      r.reason = err.what();
      return r;
    }
    if (!next) {
      r.outcome = Outcome::Final;
      r.result = finalValue(r.trace.back());
      return r;
    }
    if (r.trace.size() > fuel) {
      r.outcome = Outcome::FuelExhausted;
      return r;
    }
    r.trace.push_back(std::move(*next));
  }
}

void dumpTrace(std::ostream& os, const RunRecord& r) {
  for (const auto& c : r.trace)
    os << c.exp->label << ' ' << c.kont.depth() << ' ' << c.store.size() << '\n';
}

}  // namespace pdcfa::concrete
