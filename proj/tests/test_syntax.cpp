#include <doctest.h>

#include "pdcfa/concrete.hpp"
#include "pdcfa/corpus.hpp"
#include "pdcfa/emit.hpp"
#include "pdcfa/syntax.hpp"
#include "surface_interp.hpp"

using namespace pdcfa;

namespace {

const Exp& root(const ProgramPtr& p) { return p->root(); }

std::size_t countLets(const Exp& e) {
  std::size_t n = 0;
  if (const auto* l = e.asLet()) n = 1 + countLets(*l->body);
  if (const auto* i = e.asIf()) n = countLets(*i->thenBranch) + countLets(*i->elseBranch);
  auto atoms = [&](const Atom& a) {
    if (const auto* lr = std::get_if<LamRef>(&a)) n += countLets(*lr->lam->body);
  };
  if (const auto* c = e.asCall()) {
    atoms(c->call.fn);
    for (const auto& a : c->call.args) atoms(a);
  }
  if (const auto* l = e.asLet()) {
    const auto& c = l->rhs->asCall()->call;
    atoms(c.fn);
    for (const auto& a : c.args) atoms(a);
  }
  if (const auto* r = e.asReturn()) atoms(r->atom);
  return n;
}

}  // namespace

TEST_CASE("parse identity lambda") {
  auto t = parse("(lambda (x) x)");
  REQUIRE(t.forms.size() == 1);
  auto p = aNormalize(t);
  const auto* r = root(p).asReturn();
  REQUIRE(r);
  const auto* lam = std::get_if<LamRef>(&r->atom);
  REQUIRE(lam);
  REQUIRE(lam->lam->formals.size() == 1);
  CHECK(p->name(lam->lam->formals[0]) == "x");
  const auto* body = lam->lam->body->asReturn();
  REQUIRE(body);
  CHECK(std::get<VarRef>(body->atom).id == lam->lam->formals[0]);
}

TEST_CASE("parse application of two lambdas") {
  auto t = parse("((lambda (x) x) (lambda (y) y))");
  REQUIRE(t.forms.size() == 1);
  CHECK(t.forms[0].items.size() == 2);
  auto p = aNormalize(t);
  const auto* c = root(p).asCall();
  REQUIRE(c);
  CHECK(std::holds_alternative<LamRef>(c->call.fn));
  CHECK(std::holds_alternative<LamRef>(c->call.args[0]));
}

TEST_CASE("unbalanced parenthesis is a parse error with position") {
  try {
    parse("(let ((z (f a)))");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("unbalanced") != std::string::npos);
    CHECK(e.pos.line == 1);
  }
  CHECK_THROWS_AS(parse("(a))"), ParseError);
  CHECK_THROWS_AS(compile("(f x)"), ParseError);
}

TEST_CASE("nested call is bound by a let") {
  auto p = compile("(define (f a) a) (define (g b) b) (define x 1) (f (g x))");
  // The final expression: Let(t, (g x), (f t)).
  const Exp* e = &p->root();
  while (const auto* l = e->asLet()) {
    const auto& c = l->rhs->asCall()->call;
    if (const auto* v = std::get_if<VarRef>(&c.fn); v && p->name(v->id) == "g") {
      const auto* tail = l->body->asCall();
      REQUIRE(tail);
      CHECK(p->name(std::get<VarRef>(tail->call.fn).id) == "f");
      CHECK(std::get<VarRef>(tail->call.args[0]).id == l->binder);
      return;
    }
    e = l->body;
  }
  // Atom lets are encoded as calls to binding lambdas; walk into them.
  const auto* c = e->asCall();
  REQUIRE(c);
  const auto* lr = std::get_if<LamRef>(&c->call.fn);
  REQUIRE(lr);
  e = lr->lam->body;
  while (!e->asLet()) {
    const auto* cc = e->asCall();
    REQUIRE(cc);
    e = std::get<LamRef>(cc->call.fn).lam->body;
  }
  const auto* l = e->asLet();
  CHECK(p->name(std::get<VarRef>(l->rhs->asCall()->call.fn).id) == "g");
  CHECK(p->name(std::get<VarRef>(l->body->asCall()->call.fn).id) == "f");
}

TEST_CASE("toy program normalizes, validates and prints 36") {
  auto p = loadBenchmark("toy");
  CHECK(validateAnf(*p).empty());
  CHECK(countLets(p->root()) >= 3);
  auto r = concrete::run(p->root(), 100000);
  CHECK(r.outcome == concrete::Outcome::Final);
  REQUIRE(r.output.size() == 1);
  CHECK(std::get<concrete::Num>(r.output[0]).value == 36);
}

TEST_CASE("let-bound lambdas are flagged") {
  auto p = compile("(let ((f (lambda (x) x))) (f (lambda (y) y)))");
  int letBound = 0, other = 0;
  for (const Lam* l : p->lambdas()) {
    if (l->origin != LamOrigin::Source) continue;
    (l->letBound ? letBound : other)++;
  }
  CHECK(letBound == 1);
  CHECK(other == 1);
}

TEST_CASE("labels are dense and unique") {
  for (const auto& name : corpusNames()) {
    auto p = loadBenchmark(name);
    std::vector<int> seen(p->labelCount(), 0);
    for (Label l = 0; l < p->labelCount(); ++l) {
      CHECK(p->exp(l).label == l);
      seen[l]++;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }));
  }
}

TEST_CASE("validateAnf reports violations") {
  SUBCASE("unbound variable") {
    ProgramBuilder b;
    auto p = b.finish(b.ret(b.v("x")));
    auto vs = validateAnf(*p);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].message.find("unbound") != std::string::npos);
    CHECK(vs[0].message.find("x") != std::string::npos);
  }
  SUBCASE("let rhs that is not a call") {
    ProgramBuilder b;
    VarId v = b.var("v");
    const Exp* rhs = b.ret(IntLit{1});
    auto p = b.finish(b.let(v, rhs, b.ret(VarRef{v})));
    auto vs = validateAnf(*p);
    REQUIRE(!vs.empty());
    CHECK(vs[0].message.find("non-atomic operand") != std::string::npos);
  }
  SUBCASE("duplicate formals") {
    ProgramBuilder b;
    VarId x = b.var("x");
    const Lam* l = b.lam({x, x}, b.ret(VarRef{x}));
    auto p = b.finish(b.ret(LamRef{l}));
    CHECK(!validateAnf(*p).empty());
  }
  SUBCASE("normalizer output is valid") {
    for (const auto& name : corpusNames()) CHECK(validateAnf(*loadBenchmark(name)).empty());
  }
}

TEST_CASE("free variables") {
  ProgramBuilder b;
  VarId x = b.var("x"), f = b.var("f"), v = b.var("v");
  const Lam* id = b.lam({x}, b.ret(VarRef{x}));
  auto closed = b.finish(b.ret(LamRef{id}));
  CHECK(freeVariables(closed->root()).empty());

  ProgramBuilder b2;
  f = b2.var("f");
  x = b2.var("x");
  auto call = b2.finish(b2.tailCall(VarRef{f}, {VarRef{x}}));
  CHECK(freeVariables(call->root()) == std::set<VarId>{f, x});

  ProgramBuilder b3;
  f = b3.var("f");
  v = b3.var("v");
  const Exp* rhs = b3.tailCall(VarRef{f}, {VarRef{v}});
  auto let = b3.finish(b3.let(v, rhs, b3.ret(VarRef{v})));
  CHECK(freeVariables(let->root()) == std::set<VarId>{f, v});
}

TEST_CASE("normalization is idempotent up to labels") {
  for (const auto& name : corpusNames()) {
    auto p = loadBenchmark(name);
    auto again = compile(print(*p));
    CHECK_MESSAGE(alphaEquivalent(*p, *again), name);
  }
  auto toy = loadBenchmark("toy");
  CHECK(alphaEquivalent(*toy, *compile(print(*toy))));
}

TEST_CASE("random surface terms agree with a direct interpreter") {
  const std::size_t fuel = 20000;
  int finished = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    surface::TermGen gen(seed);
    std::string text = gen.program();
    CAPTURE(text);
    auto term = parse(text);
    std::optional<surface::Value> expected;
    bool diverged = false;
    try {
      expected = surface::Interp(fuel).run(term);
    } catch (const surface::OutOfFuel&) {
      diverged = true;
    }
    auto p = aNormalize(term);
    REQUIRE(validateAnf(*p).empty());
    // The machine takes more, smaller steps; give it a proportionally larger budget.
    auto r = concrete::run(p->root(), fuel * 20);
    if (diverged) {
      CHECK(r.outcome != concrete::Outcome::Stuck);
      continue;
    }
    REQUIRE(r.outcome == concrete::Outcome::Final);
    ++finished;
    REQUIRE(r.result);
    if (const auto* n = std::get_if<std::int64_t>(&*expected)) {
      REQUIRE(std::holds_alternative<concrete::Num>(*r.result));
      CHECK(std::get<concrete::Num>(*r.result).value == *n);
    } else if (const auto* bv = std::get_if<bool>(&*expected)) {
      REQUIRE(std::holds_alternative<concrete::Bool>(*r.result));
      CHECK(std::get<concrete::Bool>(*r.result).value == *bv);
    } else {
      CHECK(std::holds_alternative<concrete::Closure>(*r.result));
    }
  }
  CHECK(finished > 150);
}

TEST_CASE("surface interpreter agrees on the benchmarks") {
  for (const auto* name : {"toy", "mj09", "eta", "kcfa2", "kcfa3", "blur", "loop2", "sat"}) {
    CAPTURE(name);
    auto term = parse(readFile(benchmarkPath(name)));
    surface::Interp in(1000000);
    auto expected = in.run(term);
    auto p = aNormalize(term);
    auto r = concrete::run(p->root(), 1000000);
    REQUIRE(r.outcome == concrete::Outcome::Final);
    REQUIRE(r.result);
    if (const auto* n = std::get_if<std::int64_t>(&expected))
      CHECK(std::get<concrete::Num>(*r.result).value == *n);
    else if (const auto* b = std::get_if<bool>(&expected))
      CHECK(std::get<concrete::Bool>(*r.result).value == *b);
    CHECK(r.output.size() == in.printed.size());
  }
}
