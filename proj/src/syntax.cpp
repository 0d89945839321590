#include "pdcfa/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pdcfa {

namespace {

struct PrimInfo {
  PrimOp op;
  std::string_view name;
  int arity;
};

constexpr PrimInfo kPrims[] = {
    {PrimOp::Add, "+", 2},  {PrimOp::Sub, "-", 2}, {PrimOp::Mul, "*", 2},
    {PrimOp::Le, "<=", 2},  {PrimOp::Eq, "=", 2},  {PrimOp::Print, "print", 1},
};

}  // namespace

std::string_view primName(PrimOp op) {
  for (const auto& p : kPrims)
    if (p.op == op) return p.name;
  return "?";
}

std::optional<PrimOp> primFromName(std::string_view name) {
  for (const auto& p : kPrims)
    if (p.name == name) return p.op;
  return std::nullopt;
}

int primArity(PrimOp op) {
  for (const auto& p : kPrims)
    if (p.op == op) return p.arity;
  return 0;
}

SymbolKind classifyName(std::string_view name) {
  auto pct = name.rfind('%');
  if (pct == std::string_view::npos) return SymbolKind::Source;
  auto tail = name.substr(pct + 1);
  if (tail.starts_with("mk") || tail.starts_with("self")) return SymbolKind::RecursionHelper;
  return SymbolKind::Temporary;
}

Label Lam::label() const { return body->label; }

std::optional<VarId> Program::lookup(std::string_view name) const {
  for (VarId v = 0; v < names_.size(); ++v)
    if (names_[v] == name) return v;
  return std::nullopt;
}

const Lam* Program::lambdaAt(Label l) const {
  auto it = std::lower_bound(lambdas_.begin(), lambdas_.end(), l,
                             [](const Lam* lam, Label x) { return lam->label() < x; });
  if (it != lambdas_.end() && (*it)->label() == l) return *it;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Builder

VarId ProgramBuilder::var(std::string_view name) {
  auto& names = prog_->names_;
  for (VarId v = 0; v < names.size(); ++v)
    if (names[v] == name) return v;
  names.emplace_back(name);
  return static_cast<VarId>(names.size() - 1);
}

const Lam* ProgramBuilder::lam(std::vector<VarId> formals, const Exp* body, bool letBound,
                               LamOrigin origin) {
  auto l = std::make_unique<Lam>();
  l->formals = std::move(formals);
  l->body = body;
  l->letBound = letBound;
  l->origin = origin;
  prog_->lams_.push_back(std::move(l));
  return prog_->lams_.back().get();
}

namespace {
const Exp* addExp(std::vector<std::unique_ptr<Exp>>& exps, Exp e) {
  exps.push_back(std::make_unique<Exp>(std::move(e)));
  return exps.back().get();
}
}  // namespace

const Exp* ProgramBuilder::let(VarId binder, const Exp* rhs, const Exp* body) {
  return addExp(prog_->exps_, Exp{0, LetForm{binder, rhs, body}});
}

const Exp* ProgramBuilder::tailCall(Atom fn, std::vector<Atom> args) {
  return addExp(prog_->exps_, Exp{0, CallForm{Call{std::move(fn), std::move(args)}}});
}

const Exp* ProgramBuilder::ret(Atom atom) { return addExp(prog_->exps_, Exp{0, ReturnForm{atom}}); }

const Exp* ProgramBuilder::branch(Atom cond, const Exp* t, const Exp* e) {
  return addExp(prog_->exps_, Exp{0, IfForm{cond, t, e}});
}

ProgramPtr ProgramBuilder::finish(const Exp* root) {
  Program& p = *prog_;
  std::unordered_set<const Exp*> seenExp;
  std::unordered_set<const Lam*> seenLam;
  std::set<VarId> bound;
  std::vector<const Exp*> order;

  std::function<void(const Exp*)> visit;
  auto visitAtom = [&](const Atom& a) {
    if (auto lr = std::get_if<LamRef>(&a)) {
      if (!lr->lam || !seenLam.insert(lr->lam).second) return;
      bound.insert(lr->lam->formals.begin(), lr->lam->formals.end());
      visit(lr->lam->body);
    }
  };
  visit = [&](const Exp* e) {
    if (!e || !seenExp.insert(e).second) return;
    std::visit(
        [&](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, LetForm>) {
            bound.insert(f.binder);
            visit(f.rhs);
            visit(f.body);
          } else if constexpr (std::is_same_v<F, CallForm>) {
            visitAtom(f.call.fn);
            for (const auto& a : f.call.args) visitAtom(a);
          } else if constexpr (std::is_same_v<F, ReturnForm>) {
            visitAtom(f.atom);
          } else {
            visitAtom(f.cond);
            visit(f.thenBranch);
            visit(f.elseBranch);
          }
        },
        e->form);
    order.push_back(e);
  };
  visit(root);

  // Drop nodes that are not part of the final tree.
  std::erase_if(p.exps_, [&](const auto& e) { return !seenExp.count(e.get()); });
  std::erase_if(p.lams_, [&](const auto& l) { return !seenLam.count(l.get()); });

  p.byLabel_.clear();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const_cast<Exp*>(order[i])->label = static_cast<Label>(i);
    p.byLabel_.push_back(order[i]);
  }
  p.lambdas_.clear();
  for (const auto& l : p.lams_)
    if (l->body) p.lambdas_.push_back(l.get());
  std::sort(p.lambdas_.begin(), p.lambdas_.end(),
            [](const Lam* a, const Lam* b) { return a->label() < b->label(); });
  p.bound_.assign(bound.begin(), bound.end());
  p.root_ = root;
  return ProgramPtr(std::move(prog_));
}

// ---------------------------------------------------------------------------
// Free variables

namespace {

void freeAtom(const Atom& a, std::set<VarId>& out);

void freeExp(const Exp& e, std::set<VarId>& out) {
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, LetForm>) {
          std::set<VarId> body;
          freeExp(*f.body, body);
          body.erase(f.binder);
          out.insert(body.begin(), body.end());
          freeExp(*f.rhs, out);
        } else if constexpr (std::is_same_v<F, CallForm>) {
          freeAtom(f.call.fn, out);
          for (const auto& a : f.call.args) freeAtom(a, out);
        } else if constexpr (std::is_same_v<F, ReturnForm>) {
          freeAtom(f.atom, out);
        } else {
          freeAtom(f.cond, out);
          freeExp(*f.thenBranch, out);
          freeExp(*f.elseBranch, out);
        }
      },
      e.form);
}

void freeAtom(const Atom& a, std::set<VarId>& out) {
  if (auto v = std::get_if<VarRef>(&a)) {
    out.insert(v->id);
  } else if (auto l = std::get_if<LamRef>(&a)) {
    std::set<VarId> body;
    freeExp(*l->lam->body, body);
    for (VarId f : l->lam->formals) body.erase(f);
    out.insert(body.begin(), body.end());
  }
}

}  // namespace

std::set<VarId> freeVariables(const Exp& e) {
  std::set<VarId> out;
  freeExp(e, out);
  return out;
}

std::set<VarId> freeVariables(const Atom& a) {
  std::set<VarId> out;
  freeAtom(a, out);
  return out;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<AnfViolation> validateAnf(const Program& p) {
  std::vector<AnfViolation> out;
  for (Label l = 0; l < p.labelCount(); ++l)
    if (p.exp(l).label != l) out.push_back({l, "label mismatch"});

  std::multiset<VarId> scope;
  std::function<void(const Exp&)> walk;
  auto atom = [&](const Atom& a, Label at) {
    if (auto v = std::get_if<VarRef>(&a)) {
      if (!scope.count(v->id)) out.push_back({at, "unbound " + p.name(v->id)});
    } else if (auto lr = std::get_if<LamRef>(&a)) {
      const Lam& lam = *lr->lam;
      std::set<VarId> distinct(lam.formals.begin(), lam.formals.end());
      if (distinct.size() != lam.formals.size()) out.push_back({at, "duplicate formals"});
      if (!lam.body) {
        out.push_back({at, "lambda without body"});
        return;
      }
      for (VarId f : lam.formals) scope.insert(f);
      walk(*lam.body);
      for (VarId f : lam.formals) scope.erase(scope.find(f));
    }
  };
  walk = [&](const Exp& e) {
    std::visit(
        [&](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, LetForm>) {
            if (!f.rhs || !f.rhs->asCall())
              out.push_back({e.label, "non-atomic operand: let right-hand side is not a call"});
            else
              walk(*f.rhs);
            scope.insert(f.binder);
            walk(*f.body);
            scope.erase(scope.find(f.binder));
          } else if constexpr (std::is_same_v<F, CallForm>) {
            if (std::holds_alternative<IntLit>(f.call.fn) || std::holds_alternative<BoolLit>(f.call.fn))
              out.push_back({e.label, "literal in operator position"});
            atom(f.call.fn, e.label);
            for (const auto& a : f.call.args) atom(a, e.label);
          } else if constexpr (std::is_same_v<F, ReturnForm>) {
            atom(f.atom, e.label);
          } else {
            atom(f.cond, e.label);
            walk(*f.thenBranch);
            walk(*f.elseBranch);
          }
        },
        e.form);
  };
  walk(p.root());
  return out;
}

// ---------------------------------------------------------------------------
// Reader

ParseError::ParseError(SourcePos p, const std::string& msg)
    : std::runtime_error(std::to_string(p.line) + ":" + std::to_string(p.column) + ": " + msg), pos(p) {}

namespace {

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  SurfaceTerm readAll() {
    SurfaceTerm t;
    for (;;) {
      skipSpace();
      if (atEnd()) break;
      t.forms.push_back(read());
    }
    return t;
  }

 private:
  std::string_view text_;
  std::size_t i_ = 0;
  SourcePos pos_;

  bool atEnd() const { return i_ >= text_.size(); }
  char peek() const { return text_[i_]; }
  void advance() {
    if (text_[i_] == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++i_;
  }

  void skipSpace() {
    while (!atEnd()) {
      char c = peek();
      if (c == ';') {
        while (!atEnd() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  static bool delimiter(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '[' ||
           c == ']' || c == ';' || c == '"' || c == '\'';
  }

  SExpr read() {
    skipSpace();
    SourcePos start = pos_;
    if (atEnd()) throw ParseError(start, "unexpected end of input");
    char c = peek();
    if (c == '(' || c == '[') {
      char close = c == '(' ? ')' : ']';
      advance();
      SExpr list;
      list.kind = SExpr::Kind::List;
      list.pos = start;
      for (;;) {
        skipSpace();
        if (atEnd()) throw ParseError(start, "unbalanced parenthesis: '" + std::string(1, c) + "' is never closed");
        char d = peek();
        if (d == ')' || d == ']') {
          if (d != close) throw ParseError(pos_, std::string("mismatched '") + d + "'");
          advance();
          return list;
        }
        list.items.push_back(read());
      }
    }
    if (c == ')' || c == ']') throw ParseError(start, std::string("unbalanced parenthesis: unexpected '") + c + "'");
    if (c == '\'' || c == '"') throw ParseError(start, std::string("unsupported syntax '") + c + "'");

    std::size_t begin = i_;
    while (!atEnd() && !delimiter(peek())) advance();
    std::string tok(text_.substr(begin, i_ - begin));
    SExpr atom;
    atom.pos = start;
    if (tok == "#t" || tok == "#true" || tok == "#f" || tok == "#false") {
      atom.kind = SExpr::Kind::Bool;
      atom.boolValue = tok[1] == 't';
      atom.text = tok;
      return atom;
    }
    if (tok[0] == '#') throw ParseError(start, "unknown token " + tok);
    std::int64_t value = 0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (*first == '+' && tok.size() > 1) ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec == std::errc() && ptr == last) {
      atom.kind = SExpr::Kind::Int;
      atom.intValue = value;
      atom.text = tok;
      return atom;
    }
    if (ec == std::errc::result_out_of_range) throw ParseError(start, "integer literal out of range");
    atom.kind = SExpr::Kind::Symbol;
    atom.text = tok;
    return atom;
  }
};

}  // namespace

SurfaceTerm parse(std::string_view text) { return Reader(text).readAll(); }

std::string toString(const SExpr& s) {
  switch (s.kind) {
    case SExpr::Kind::Symbol:
      return s.text;
    case SExpr::Kind::Int:
      return std::to_string(s.intValue);
    case SExpr::Kind::Bool:
      return s.boolValue ? "#t" : "#f";
    case SExpr::Kind::List: {
      std::string out = "(";
      for (std::size_t i = 0; i < s.items.size(); ++i) {
        if (i) out += ' ';
        out += toString(s.items[i]);
      }
      return out + ")";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Desugaring into a small core, then A-normalization.

namespace {

struct Core {
  enum class Kind : std::uint8_t { Var, Int, Bool, Lambda, App, If, Let };
  Kind kind = Kind::Var;
  std::string name;
  std::int64_t intValue = 0;
  bool boolValue = false;
  std::vector<std::string> names;  // Lambda formals or Let binders
  std::vector<Core> kids;          // Lambda: body; App: fn args; If: c t e; Let: rhs... body
  bool letBound = false;
  SourcePos pos;

  bool atomic() const { return kind == Kind::Var || kind == Kind::Int || kind == Kind::Bool || kind == Kind::Lambda; }
};

Core mkVar(std::string n, SourcePos p) {
  Core c;
  c.kind = Core::Kind::Var;
  c.name = std::move(n);
  c.pos = p;
  return c;
}
Core mkBool(bool b, SourcePos p) {
  Core c;
  c.kind = Core::Kind::Bool;
  c.boolValue = b;
  c.pos = p;
  return c;
}
Core mkIf(Core a, Core b, Core d, SourcePos p) {
  Core c;
  c.kind = Core::Kind::If;
  c.kids = {std::move(a), std::move(b), std::move(d)};
  c.pos = p;
  return c;
}
Core mkApp(Core fn, std::vector<Core> args, SourcePos p) {
  Core c;
  c.kind = Core::Kind::App;
  c.pos = p;
  c.kids.push_back(std::move(fn));
  for (auto& a : args) c.kids.push_back(std::move(a));
  return c;
}
Core mkLet(std::vector<std::pair<std::string, Core>> bindings, Core body, SourcePos p) {
  Core c;
  c.kind = Core::Kind::Let;
  c.pos = p;
  for (auto& [n, rhs] : bindings) {
    if (rhs.kind == Core::Kind::Lambda) rhs.letBound = true;
    c.names.push_back(n);
    c.kids.push_back(std::move(rhs));
  }
  c.kids.push_back(std::move(body));
  return c;
}
Core mkLambda(std::vector<std::string> formals, Core body, SourcePos p) {
  Core c;
  c.kind = Core::Kind::Lambda;
  c.pos = p;
  c.names = std::move(formals);
  c.kids.push_back(std::move(body));
  return c;
}

void coreFree(const Core& c, std::set<std::string>& out) {
  switch (c.kind) {
    case Core::Kind::Var:
      out.insert(c.name);
      return;
    case Core::Kind::Int:
    case Core::Kind::Bool:
      return;
    case Core::Kind::Lambda: {
      std::set<std::string> body;
      coreFree(c.kids[0], body);
      for (const auto& f : c.names) body.erase(f);
      out.insert(body.begin(), body.end());
      return;
    }
    case Core::Kind::Let: {
      std::set<std::string> body;
      coreFree(c.kids.back(), body);
      for (const auto& n : c.names) body.erase(n);
      out.insert(body.begin(), body.end());
      for (std::size_t i = 0; i + 1 < c.kids.size(); ++i) coreFree(c.kids[i], out);
      return;
    }
    default:
      for (const auto& k : c.kids) coreFree(k, out);
  }
}

std::set<std::string> coreFree(const Core& c) {
  std::set<std::string> out;
  coreFree(c, out);
  return out;
}

void collectSymbols(const SExpr& s, std::unordered_set<std::string>& out) {
  if (s.kind == SExpr::Kind::Symbol) out.insert(s.text);
  for (const auto& k : s.items) collectSymbols(k, out);
}

const std::unordered_set<std::string_view> kKeywords = {
    "lambda", "let", "let*", "letrec", "if", "cond", "else", "and", "or", "not", "begin", "define"};

class Desugarer {
 public:
  explicit Desugarer(const SurfaceTerm& t) {
    for (const auto& f : t.forms) collectSymbols(f, used_);
  }

  Core program(const SurfaceTerm& t) {
    if (t.forms.empty()) throw ParseError({1, 1}, "empty program");
    return body(t.forms, 0, t.forms.front().pos);
  }

 private:
  std::unordered_set<std::string> used_;
  int tempCounter_ = 0;

  std::string fresh(const std::string& base) {
    if (used_.insert(base).second) return base;
    for (int i = 2;; ++i) {
      std::string n = base + std::to_string(i);
      if (used_.insert(n).second) return n;
    }
  }
  std::string temp() {
    for (;;) {
      std::string n = "%t" + std::to_string(++tempCounter_);
      if (used_.insert(n).second) return n;
    }
  }

  [[noreturn]] static void fail(const SExpr& s, const std::string& msg) { throw ParseError(s.pos, msg); }

  static const std::string& symbol(const SExpr& s, const char* what) {
    if (s.kind != SExpr::Kind::Symbol) fail(s, std::string("expected identifier in ") + what);
    if (kKeywords.count(s.text)) fail(s, "keyword '" + s.text + "' used as identifier");
    return s.text;
  }

  static std::vector<std::string> formals(const SExpr& s) {
    if (s.kind != SExpr::Kind::List) fail(s, "lambda formals must be a list");
    std::vector<std::string> out;
    for (const auto& f : s.items) {
      const auto& n = symbol(f, "formals");
      if (std::find(out.begin(), out.end(), n) != out.end()) fail(f, "duplicate formal " + n);
      out.push_back(n);
    }
    return out;
  }

  static bool isDefine(const SExpr& s) {
    return s.kind == SExpr::Kind::List && !s.items.empty() && s.items[0].isSymbol("define");
  }

  // (define (f x ...) body ...) or (define x e)
  std::pair<std::string, Core> define(const SExpr& s) {
    if (s.items.size() < 3) fail(s, "define: expected a name and a body");
    const SExpr& head = s.items[1];
    if (head.kind == SExpr::Kind::List) {
      if (head.items.empty()) fail(head, "define: missing function name");
      std::string name = symbol(head.items[0], "define");
      SExpr args = head;
      args.items.erase(args.items.begin());
      Core lam = mkLambda(formals(args), body(s.items, 2, s.pos), s.pos);
      return {name, std::move(lam)};
    }
    if (s.items.size() != 3) fail(s, "define: expected exactly one value");
    return {symbol(head, "define"), expr(s.items[2])};
  }

  // A sequence of internal definitions and expressions.
  Core body(const std::vector<SExpr>& forms, std::size_t from, SourcePos pos) {
    if (from >= forms.size()) throw ParseError(pos, "body has no expression");
    const SExpr& first = forms[from];
    if (isDefine(first)) {
      std::vector<std::pair<std::string, Core>> group;
      std::size_t i = from;
      for (; i < forms.size() && isDefine(forms[i]); ++i) group.push_back(define(forms[i]));
      Core rest = body(forms, i, forms.back().pos);
      // Runs of lambda definitions are mutually recursive; anything else binds in order.
      std::vector<std::pair<std::string, Core>> run;
      for (std::size_t j = group.size(); j-- > 0;) {
        if (group[j].second.kind == Core::Kind::Lambda) {
          run.insert(run.begin(), std::move(group[j]));
          continue;
        }
        if (!run.empty()) rest = letrec(std::move(run), std::move(rest), pos), run.clear();
        std::vector<std::pair<std::string, Core>> one;
        one.push_back(std::move(group[j]));
        rest = mkLet(std::move(one), std::move(rest), pos);
      }
      if (!run.empty()) rest = letrec(std::move(run), std::move(rest), pos);
      return rest;
    }
    if (from + 1 == forms.size()) return expr(first);
    std::vector<std::pair<std::string, Core>> b;
    b.emplace_back(temp(), expr(first));
    return mkLet(std::move(b), body(forms, from + 1, pos), first.pos);
  }

  Core letrec(std::vector<std::pair<std::string, Core>> bindings, Core rest, SourcePos pos) {
    const std::size_t n = bindings.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) {
      if (bindings[i].second.kind != Core::Kind::Lambda)
        throw ParseError(bindings[i].second.pos, "letrec binding for " + bindings[i].first + " must be a lambda");
      if (!index.emplace(bindings[i].first, i).second)
        throw ParseError(bindings[i].second.pos, "duplicate binding " + bindings[i].first);
    }
    std::vector<std::vector<std::size_t>> deps(n);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& v : coreFree(bindings[i].second))
        if (auto it = index.find(v); it != index.end()) deps[i].push_back(it->second);

    // Tarjan; components come out dependencies first.
    std::vector<int> idx(n, -1), low(n, 0);
    std::vector<bool> onStack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> sccs;
    int counter = 0;
    std::function<void(std::size_t)> strong = [&](std::size_t v) {
      idx[v] = low[v] = counter++;
      stack.push_back(v);
      onStack[v] = true;
      for (std::size_t w : deps[v]) {
        if (idx[w] < 0) {
          strong(w);
          low[v] = std::min(low[v], low[w]);
        } else if (onStack[w]) {
          low[v] = std::min(low[v], idx[w]);
        }
      }
      if (low[v] == idx[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          onStack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        sccs.push_back(std::move(comp));
      }
    };
    for (std::size_t i = 0; i < n; ++i)
      if (idx[i] < 0) strong(i);

    for (std::size_t c = sccs.size(); c-- > 0;) {
      const auto& comp = sccs[c];
      bool recursive = comp.size() > 1 ||
                       std::find(deps[comp[0]].begin(), deps[comp[0]].end(), comp[0]) != deps[comp[0]].end();
      if (!recursive) {
        std::vector<std::pair<std::string, Core>> one;
        one.push_back(std::move(bindings[comp[0]]));
        rest = mkLet(std::move(one), std::move(rest), pos);
        continue;
      }
      rest = recursiveGroup(bindings, comp, std::move(rest), pos);
    }
    return rest;
  }

  // Self-application: each member gets a maker taking every maker of the
  // group; calling a maker on the makers yields the function.
  Core recursiveGroup(std::vector<std::pair<std::string, Core>>& bindings, const std::vector<std::size_t>& comp,
                      Core rest, SourcePos pos) {
    std::vector<std::string> fnames, makers, selves;
    for (std::size_t i : comp) {
      fnames.push_back(bindings[i].first);
      makers.push_back(fresh(bindings[i].first + "%mk"));
      selves.push_back(fresh(bindings[i].first + "%self"));
    }
    auto selfArgs = [&] {
      std::vector<Core> out;
      for (const auto& s : selves) out.push_back(mkVar(s, pos));
      return out;
    };

    std::vector<std::pair<std::string, Core>> makerBindings;
    for (std::size_t m = 0; m < comp.size(); ++m) {
      Core lam = std::move(bindings[comp[m]].second);
      Core fnBody = std::move(lam.kids[0]);
      auto free = coreFree(fnBody);
      for (const auto& f : lam.names) free.erase(f);
      for (std::size_t j = comp.size(); j-- > 0;) {
        if (!free.count(fnames[j])) continue;
        std::vector<std::pair<std::string, Core>> b;
        b.emplace_back(fnames[j], mkApp(mkVar(selves[j], pos), selfArgs(), pos));
        fnBody = mkLet(std::move(b), std::move(fnBody), pos);
      }
      lam.kids[0] = std::move(fnBody);
      std::vector<std::pair<std::string, Core>> inner;
      inner.emplace_back(fnames[m], std::move(lam));
      Core makerBody = mkLet(std::move(inner), mkVar(fnames[m], pos), pos);
      makerBindings.emplace_back(makers[m], mkLambda(selves, std::move(makerBody), pos));
    }

    auto restFree = coreFree(rest);
    for (std::size_t m = comp.size(); m-- > 0;) {
      if (!restFree.count(fnames[m])) continue;
      std::vector<Core> args;
      for (const auto& mk : makers) args.push_back(mkVar(mk, pos));
      std::vector<std::pair<std::string, Core>> b;
      b.emplace_back(fnames[m], mkApp(mkVar(makers[m], pos), std::move(args), pos));
      rest = mkLet(std::move(b), std::move(rest), pos);
    }
    return mkLet(std::move(makerBindings), std::move(rest), pos);
  }

  std::vector<std::pair<std::string, Core>> bindingList(const SExpr& s) {
    if (s.kind != SExpr::Kind::List) fail(s, "let: bindings must be a list");
    std::vector<std::pair<std::string, Core>> out;
    for (const auto& b : s.items) {
      if (b.kind != SExpr::Kind::List || b.items.size() != 2) fail(b, "let: binding must be (name expr)");
      out.emplace_back(symbol(b.items[0], "let binding"), expr(b.items[1]));
    }
    return out;
  }

  Core expr(const SExpr& s) {
    switch (s.kind) {
      case SExpr::Kind::Int: {
        Core c;
        c.kind = Core::Kind::Int;
        c.intValue = s.intValue;
        c.pos = s.pos;
        return c;
      }
      case SExpr::Kind::Bool:
        return mkBool(s.boolValue, s.pos);
      case SExpr::Kind::Symbol:
        if (kKeywords.count(s.text)) fail(s, "keyword '" + s.text + "' used as expression");
        return mkVar(s.text, s.pos);
      case SExpr::Kind::List:
        break;
    }
    if (s.items.empty()) fail(s, "empty application");
    const SExpr& head = s.items[0];
    const auto n = s.items.size();
    if (head.kind == SExpr::Kind::Symbol && kKeywords.count(head.text)) {
      const std::string& kw = head.text;
      if (kw == "lambda") {
        if (n < 3) fail(s, "lambda: expected formals and body");
        return mkLambda(formals(s.items[1]), body(s.items, 2, s.pos), s.pos);
      }
      if (kw == "let") {
        if (n >= 4 && s.items[1].kind == SExpr::Kind::Symbol) {
          // Named let.
          std::string name = symbol(s.items[1], "named let");
          auto bs = bindingList(s.items[2]);
          std::vector<std::string> fs;
          std::vector<Core> inits;
          for (auto& [x, e] : bs) {
            fs.push_back(x);
            inits.push_back(std::move(e));
          }
          std::vector<std::pair<std::string, Core>> fn;
          fn.emplace_back(name, mkLambda(fs, body(s.items, 3, s.pos), s.pos));
          Core loop = letrec(std::move(fn), mkVar(name, s.pos), s.pos);
          return mkApp(std::move(loop), std::move(inits), s.pos);
        }
        if (n < 3) fail(s, "let: expected bindings and body");
        auto bs = bindingList(s.items[1]);
        std::set<std::string> seen;
        for (const auto& b : bs)
          if (!seen.insert(b.first).second) fail(s, "let: duplicate binding " + b.first);
        return mkLet(std::move(bs), body(s.items, 2, s.pos), s.pos);
      }
      if (kw == "let*") {
        if (n < 3) fail(s, "let*: expected bindings and body");
        auto bs = bindingList(s.items[1]);
        Core out = body(s.items, 2, s.pos);
        for (std::size_t i = bs.size(); i-- > 0;) {
          std::vector<std::pair<std::string, Core>> one;
          one.push_back(std::move(bs[i]));
          out = mkLet(std::move(one), std::move(out), s.pos);
        }
        return out;
      }
      if (kw == "letrec") {
        if (n < 3) fail(s, "letrec: expected bindings and body");
        return letrec(bindingList(s.items[1]), body(s.items, 2, s.pos), s.pos);
      }
      if (kw == "if") {
        if (n != 4) fail(s, "if: expected condition, consequent and alternative");
        return mkIf(expr(s.items[1]), expr(s.items[2]), expr(s.items[3]), s.pos);
      }
      if (kw == "cond") return cond(s, 1);
      if (kw == "and") return andOr(s, 1, true);
      if (kw == "or") return andOr(s, 1, false);
      if (kw == "not") {
        if (n != 2) fail(s, "not: expected one argument");
        return mkIf(expr(s.items[1]), mkBool(false, s.pos), mkBool(true, s.pos), s.pos);
      }
      if (kw == "begin") {
        if (n < 2) fail(s, "begin: expected at least one expression");
        return body(s.items, 1, s.pos);
      }
      if (kw == "define") fail(s, "define is only allowed at the start of a body");
      fail(s, "misplaced keyword " + kw);
    }
    std::vector<Core> args;
    for (std::size_t i = 1; i < n; ++i) args.push_back(expr(s.items[i]));
    return mkApp(expr(head), std::move(args), s.pos);
  }

  Core cond(const SExpr& s, std::size_t i) {
    if (i >= s.items.size()) return mkBool(false, s.pos);
    const SExpr& clause = s.items[i];
    if (clause.kind != SExpr::Kind::List || clause.items.size() < 2) fail(clause, "cond: clause must be [test expr ...]");
    if (clause.items[0].isSymbol("else")) {
      if (i + 1 != s.items.size()) fail(clause, "cond: else must be the last clause");
      return body(clause.items, 1, clause.pos);
    }
    return mkIf(expr(clause.items[0]), body(clause.items, 1, clause.pos), cond(s, i + 1), clause.pos);
  }

  Core andOr(const SExpr& s, std::size_t i, bool isAnd) {
    if (i >= s.items.size()) return mkBool(isAnd, s.pos);
    if (i + 1 == s.items.size()) return expr(s.items[i]);
    if (isAnd) return mkIf(expr(s.items[i]), andOr(s, i + 1, true), mkBool(false, s.pos), s.items[i].pos);
    std::string t = temp();
    std::vector<std::pair<std::string, Core>> b;
    b.emplace_back(t, expr(s.items[i]));
    Core test = mkIf(mkVar(t, s.pos), mkVar(t, s.pos), andOr(s, i + 1, false), s.items[i].pos);
    return mkLet(std::move(b), std::move(test), s.items[i].pos);
  }
};

class Normalizer {
 public:
  explicit Normalizer(ProgramBuilder& b, std::unordered_set<std::string> used) : b_(b), used_(std::move(used)) {}

  const Exp* tail(const Core& c) {
    switch (c.kind) {
      case Core::Kind::App:
        return atoms(c.kids, 0, {}, [&](std::vector<Atom> as) {
          Atom fn = as.front();
          as.erase(as.begin());
          return b_.tailCall(fn, std::move(as));
        });
      case Core::Kind::If:
        return atom(c.kids[0], [&](Atom a) {
          const Exp* t = tail(c.kids[1]);
          const Exp* e = tail(c.kids[2]);
          return b_.branch(a, t, e);
        });
      case Core::Kind::Let:
        return let(c, [&] { return tail(c.kids.back()); });
      default:
        return atom(c, [&](Atom a) { return b_.ret(a); });
    }
  }

 private:
  ProgramBuilder& b_;
  std::unordered_set<std::string> used_;
  std::vector<std::string> scope_;
  int tempCounter_ = 0;

  using AtomK = std::function<const Exp*(Atom)>;
  using BodyK = std::function<const Exp*()>;

  std::string temp() {
    for (;;) {
      std::string n = "%t" + std::to_string(++tempCounter_);
      if (used_.insert(n).second) return n;
    }
  }

  bool inScope(const std::string& n) const { return std::find(scope_.rbegin(), scope_.rend(), n) != scope_.rend(); }

  template <class F>
  auto scoped(const std::vector<std::string>& names, F&& f) {
    for (const auto& n : names) scope_.push_back(n);
    auto r = f();
    scope_.resize(scope_.size() - names.size());
    return r;
  }

  Atom atomic(const Core& c) {
    switch (c.kind) {
      case Core::Kind::Var:
        if (inScope(c.name)) return VarRef{b_.var(c.name)};
        if (auto op = primFromName(c.name)) return PrimRef{*op};
        throw ParseError(c.pos, "unbound variable " + c.name);
      case Core::Kind::Int:
        return IntLit{c.intValue};
      case Core::Kind::Bool:
        return BoolLit{c.boolValue};
      case Core::Kind::Lambda: {
        std::vector<VarId> fs;
        for (const auto& f : c.names) fs.push_back(b_.var(f));
        const Exp* body = scoped(c.names, [&] { return tail(c.kids[0]); });
        return LamRef{b_.lam(std::move(fs), body, c.letBound)};
      }
      default:
        throw ParseError(c.pos, "internal: not an atom");
    }
  }

  const Exp* atom(const Core& c, const AtomK& k) {
    if (c.atomic()) return k(atomic(c));
    std::string t = temp();
    return bind(t, c, [&] { return k(VarRef{b_.var(t)}); });
  }

  const Exp* atoms(const std::vector<Core>& cs, std::size_t i, std::vector<Atom> acc,
                   const std::function<const Exp*(std::vector<Atom>)>& k) {
    if (i == cs.size()) return k(std::move(acc));
    return atom(cs[i], [&](Atom a) {
      auto next = acc;
      next.push_back(a);
      return atoms(cs, i + 1, std::move(next), k);
    });
  }

  // Evaluate c and bind its value to x around the body produced by k; k runs
  // with x in scope.
  const Exp* bind(const std::string& x, const Core& c, const BodyK& k) {
    if (c.kind == Core::Kind::App) {
      return atoms(c.kids, 0, {}, [&](std::vector<Atom> as) {
        Atom fn = as.front();
        as.erase(as.begin());
        const Exp* rhs = b_.tailCall(fn, std::move(as));
        VarId v = b_.var(x);
        return b_.let(v, rhs, scoped({x}, k));
      });
    }
    if (c.atomic()) {
      Atom a = atomic(c);
      VarId v = b_.var(x);
      const Lam* wrap = b_.lam({v}, scoped({x}, k), false, LamOrigin::LetBinding);
      return b_.tailCall(LamRef{wrap}, {a});
    }
    const Lam* thunk = b_.lam({}, tail(c), false, LamOrigin::Thunk);
    const Exp* rhs = b_.tailCall(LamRef{thunk}, {});
    VarId v = b_.var(x);
    return b_.let(v, rhs, scoped({x}, k));
  }

  const Exp* let(const Core& c, const BodyK& k) {
    const std::size_t n = c.names.size();
    bool allAtomic = true;
    for (std::size_t i = 0; i < n; ++i) allAtomic &= c.kids[i].atomic();
    if (allAtomic) {
      std::vector<Atom> args;
      for (std::size_t i = 0; i < n; ++i) args.push_back(atomic(c.kids[i]));
      std::vector<VarId> fs;
      for (const auto& x : c.names) fs.push_back(b_.var(x));
      const Lam* wrap = b_.lam(std::move(fs), scoped(c.names, k), false, LamOrigin::LetBinding);
      return b_.tailCall(LamRef{wrap}, std::move(args));
    }
    bool captures = false;
    if (n > 1) {
      std::set<std::string> binders(c.names.begin(), c.names.end());
      for (std::size_t i = 0; i < n && !captures; ++i)
        for (const auto& v : coreFree(c.kids[i]))
          if (binders.count(v)) captures = true;
    }
    if (captures) {
      // Evaluate every right-hand side outside the new scope first.
      std::vector<std::string> temps;
      for (std::size_t i = 0; i < n; ++i) temps.push_back(temp());
      std::function<const Exp*(std::size_t)> go = [&](std::size_t i) -> const Exp* {
        if (i == n) {
          Core rename;
          rename.kind = Core::Kind::Let;
          for (std::size_t j = 0; j < n; ++j) {
            rename.names.push_back(c.names[j]);
            rename.kids.push_back(mkVar(temps[j], c.pos));
          }
          rename.kids.push_back(Core{});
          return let(rename, k);
        }
        return bind(temps[i], c.kids[i], [&] { return go(i + 1); });
      };
      return go(0);
    }
    std::function<const Exp*(std::size_t)> go = [&](std::size_t i) -> const Exp* {
      if (i == n) return k();
      // Group consecutive atomic right-hand sides into one binding lambda.
      std::size_t j = i;
      while (j < n && c.kids[j].atomic()) ++j;
      if (j > i) {
        std::vector<Atom> args;
        std::vector<VarId> fs;
        std::vector<std::string> names;
        for (std::size_t m = i; m < j; ++m) {
          args.push_back(atomic(c.kids[m]));
          fs.push_back(b_.var(c.names[m]));
          names.push_back(c.names[m]);
        }
        const Lam* wrap = b_.lam(std::move(fs), scoped(names, [&] { return go(j); }), false, LamOrigin::LetBinding);
        return b_.tailCall(LamRef{wrap}, std::move(args));
      }
      return bind(c.names[i], c.kids[i], [&] { return go(i + 1); });
    };
    return go(0);
  }
};

}  // namespace

ProgramPtr aNormalize(const SurfaceTerm& term) {
  Desugarer d(term);
  Core core = d.program(term);
  std::unordered_set<std::string> used;
  for (const auto& f : term.forms) collectSymbols(f, used);
  std::function<void(const Core&)> names = [&](const Core& c) {
    if (c.kind == Core::Kind::Var) used.insert(c.name);
    for (const auto& n : c.names) used.insert(n);
    for (const auto& k : c.kids) names(k);
  };
  names(core);
  ProgramBuilder b;
  Normalizer n(b, std::move(used));
  const Exp* root = n.tail(core);
  return b.finish(root);
}

ProgramPtr compile(std::string_view text) { return aNormalize(parse(text)); }

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string expText(const Program& p, const Exp& e);

std::string callText(const Program& p, const Call& c) {
  std::string out = "(" + atomText(p, c.fn);
  for (const auto& a : c.args) out += " " + atomText(p, a);
  return out + ")";
}

std::string expText(const Program& p, const Exp& e) {
  if (auto l = e.asLet()) {
    const Call& call = l->rhs->asCall()->call;
    std::string rhs;
    auto lr = std::get_if<LamRef>(&call.fn);
    if (lr && lr->lam->origin == LamOrigin::Thunk && call.args.empty())
      rhs = expText(p, *lr->lam->body);
    else
      rhs = callText(p, call);
    return "(let ((" + p.name(l->binder) + " " + rhs + ")) " + expText(p, *l->body) + ")";
  }
  if (auto c = e.asCall()) {
    auto lr = std::get_if<LamRef>(&c->call.fn);
    if (lr && lr->lam->origin == LamOrigin::LetBinding && lr->lam->formals.size() == c->call.args.size() &&
        !c->call.args.empty()) {
      std::string out = "(let (";
      for (std::size_t i = 0; i < c->call.args.size(); ++i) {
        if (i) out += " ";
        out += "(" + p.name(lr->lam->formals[i]) + " " + atomText(p, c->call.args[i]) + ")";
      }
      return out + ") " + expText(p, *lr->lam->body) + ")";
    }
    return callText(p, c->call);
  }
  if (auto r = e.asReturn()) return atomText(p, r->atom);
  const IfForm& f = *e.asIf();
  return "(if " + atomText(p, f.cond) + " " + expText(p, *f.thenBranch) + " " + expText(p, *f.elseBranch) + ")";
}

}  // namespace

std::string atomText(const Program& p, const Atom& a) {
  return std::visit(
      [&](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, VarRef>) {
          return p.name(x.id);
        } else if constexpr (std::is_same_v<T, LamRef>) {
          std::string out = "(lambda (";
          for (std::size_t i = 0; i < x.lam->formals.size(); ++i) {
            if (i) out += " ";
            out += p.name(x.lam->formals[i]);
          }
          return out + ") " + expText(p, *x.lam->body) + ")";
        } else if constexpr (std::is_same_v<T, IntLit>) {
          return std::to_string(x.value);
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          return x.value ? "#t" : "#f";
        } else {
          return std::string(primName(x.op));
        }
      },
      a);
}

std::string print(const Program& p) { return expText(p, p.root()) + "\n"; }

// ---------------------------------------------------------------------------
// Structural comparison

namespace {

struct AlphaEq {
  const Program& pa;
  const Program& pb;

  bool var(VarId a, VarId b) const { return pa.name(a) == pb.name(b); }

  bool atom(const Atom& a, const Atom& b) const {
    if (a.index() != b.index()) return false;
    if (auto x = std::get_if<VarRef>(&a)) return var(x->id, std::get<VarRef>(b).id);
    if (auto x = std::get_if<LamRef>(&a)) {
      const Lam& la = *x->lam;
      const Lam& lb = *std::get<LamRef>(b).lam;
      if (la.letBound != lb.letBound || la.origin != lb.origin || la.formals.size() != lb.formals.size())
        return false;
      for (std::size_t i = 0; i < la.formals.size(); ++i)
        if (!var(la.formals[i], lb.formals[i])) return false;
      return exp(*la.body, *lb.body);
    }
    return a == b;
  }

  bool call(const Call& a, const Call& b) const {
    if (!atom(a.fn, b.fn) || a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
      if (!atom(a.args[i], b.args[i])) return false;
    return true;
  }

  bool exp(const Exp& a, const Exp& b) const {
    if (a.form.index() != b.form.index()) return false;
    if (auto x = a.asLet()) {
      auto y = b.asLet();
      return var(x->binder, y->binder) && exp(*x->rhs, *y->rhs) && exp(*x->body, *y->body);
    }
    if (auto x = a.asCall()) return call(x->call, b.asCall()->call);
    if (auto x = a.asReturn()) return atom(x->atom, b.asReturn()->atom);
    auto x = a.asIf();
    auto y = b.asIf();
    return atom(x->cond, y->cond) && exp(*x->thenBranch, *y->thenBranch) && exp(*x->elseBranch, *y->elseBranch);
  }
};

}  // namespace

bool alphaEquivalent(const Program& a, const Program& b) {
  return a.labelCount() == b.labelCount() && AlphaEq{a, b}.exp(a.root(), b.root());
}

}  // namespace pdcfa
