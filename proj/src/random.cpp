#include "pdcfa/random.hpp"

#include <random>
#include <string>

namespace pdcfa {

namespace {

class Gen {
 public:
  Gen(std::uint64_t seed, std::size_t maxExps) : rng_(seed), budget_(maxExps) {}

  ProgramPtr run() {
    const Exp* root = exp({}, 0);
    return b_.finish(root);
  }

 private:
  std::mt19937_64 rng_;
  std::size_t budget_;
  ProgramBuilder b_;
  unsigned fresh_ = 0;

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  VarId freshVar() { return b_.var("v" + std::to_string(fresh_++)); }

  Atom atom(const std::vector<VarId>& scope, int depth, bool operatorPos) {
    // Lambdas cost at least one expression for their body.
    if (budget_ > 2 && depth < 4 && coin(operatorPos ? 0.45 : 0.3)) {
      std::vector<VarId> formals;
      std::size_t arity = pick(3);
      for (std::size_t i = 0; i < arity; ++i) formals.push_back(freshVar());
      auto inner = scope;
      inner.insert(inner.end(), formals.begin(), formals.end());
      const Exp* body = exp(inner, depth + 1);
      return LamRef{b_.lam(formals, body)};
    }
    if (!scope.empty() && coin(0.7)) return VarRef{scope[pick(scope.size())]};
    switch (pick(operatorPos ? 2 : 3)) {
      case 0: return PrimRef{static_cast<PrimOp>(pick(5))};
      case 1: return IntLit{static_cast<std::int64_t>(pick(4))};
      default: return BoolLit{coin(0.5)};
    }
  }

  Call call(const std::vector<VarId>& scope, int depth) {
    Call c;
    c.fn = atom(scope, depth, true);
    std::size_t n = pick(3);
    for (std::size_t i = 0; i < n; ++i) c.args.push_back(atom(scope, depth, false));
    return c;
  }

  const Exp* exp(const std::vector<VarId>& scope, int depth) {
    if (budget_ > 0) --budget_;
    std::size_t choice = budget_ < 3 ? 0 : pick(4);
    switch (choice) {
      case 1: {
        Call c = call(scope, depth);
        return b_.tailCall(c.fn, c.args);
      }
      case 2: {
        if (budget_ < 2) break;
        --budget_;
        Call c = call(scope, depth);
        const Exp* rhs = b_.tailCall(c.fn, c.args);
        VarId x = freshVar();
        auto inner = scope;
        inner.push_back(x);
        return b_.let(x, rhs, exp(inner, depth));
      }
      case 3: {
        if (budget_ < 2) break;
        Atom cond = atom(scope, depth, false);
        const Exp* t = exp(scope, depth);
        const Exp* e = exp(scope, depth);
        return b_.branch(cond, t, e);
      }
      default: break;
    }
    return b_.ret(atom(scope, depth, false));
  }
};

}  // namespace

ProgramPtr randomProgram(std::uint64_t seed, std::size_t maxExps) {
  // The budget is soft at the leaves; redraw until the program fits.
  for (std::uint64_t attempt = 0;; ++attempt) {
    auto p = Gen(seed * 0x9e3779b97f4a7c15ULL + attempt, maxExps).run();
    if (p->labelCount() <= maxExps) return p;
  }
}

}  // namespace pdcfa
