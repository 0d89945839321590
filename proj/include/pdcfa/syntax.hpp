#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pdcfa {

using Label = std::uint32_t;
using VarId = std::uint32_t;

enum class PrimOp : std::uint8_t { Add, Sub, Mul, Le, Eq, Print };

std::string_view primName(PrimOp op);
std::optional<PrimOp> primFromName(std::string_view name);
int primArity(PrimOp op);

// Names containing '%' are compiler-generated; the suffix decides which kind.
enum class SymbolKind : std::uint8_t { Source, Temporary, RecursionHelper };
SymbolKind classifyName(std::string_view name);

struct Exp;

// How a lambda came to exist. Binding lambdas encode atom lets and thunks
// encode non-tail compound expressions; the printer uses this to give back
// surface syntax that normalizes to the same tree.
enum class LamOrigin : std::uint8_t { Source, LetBinding, Thunk };

struct Lam {
  std::vector<VarId> formals;
  const Exp* body = nullptr;
  bool letBound = false;
  LamOrigin origin = LamOrigin::Source;

  Label label() const;
};

struct VarRef {
  VarId id;
  bool operator==(const VarRef&) const = default;
};
struct LamRef {
  const Lam* lam;
  bool operator==(const LamRef&) const = default;
};
struct IntLit {
  std::int64_t value;
  bool operator==(const IntLit&) const = default;
};
struct BoolLit {
  bool value;
  bool operator==(const BoolLit&) const = default;
};
struct PrimRef {
  PrimOp op;
  bool operator==(const PrimRef&) const = default;
};

using Atom = std::variant<VarRef, LamRef, IntLit, BoolLit, PrimRef>;

struct Call {
  Atom fn;
  std::vector<Atom> args;
};

struct LetForm {
  VarId binder;
  const Exp* rhs;  // a CallForm node
  const Exp* body;
};
struct CallForm {
  Call call;
};
struct ReturnForm {
  Atom atom;
};
struct IfForm {
  Atom cond;
  const Exp* thenBranch;
  const Exp* elseBranch;
};

struct Exp {
  Label label = 0;
  std::variant<LetForm, CallForm, ReturnForm, IfForm> form;

  const LetForm* asLet() const { return std::get_if<LetForm>(&form); }
  const CallForm* asCall() const { return std::get_if<CallForm>(&form); }
  const ReturnForm* asReturn() const { return std::get_if<ReturnForm>(&form); }
  const IfForm* asIf() const { return std::get_if<IfForm>(&form); }
};

class ProgramBuilder;

class Program {
 public:
  const Exp& root() const { return *root_; }
  std::size_t labelCount() const { return byLabel_.size(); }
  const Exp& exp(Label l) const { return *byLabel_.at(l); }

  std::size_t varCount() const { return names_.size(); }
  const std::string& name(VarId v) const { return names_.at(v); }
  SymbolKind symbolKind(VarId v) const { return classifyName(names_.at(v)); }
  std::optional<VarId> lookup(std::string_view name) const;

  // Every lambda in the program, ordered by label.
  const std::vector<const Lam*>& lambdas() const { return lambdas_; }
  const Lam* lambdaAt(Label l) const;

  // Variables bound somewhere in the program (formals and let binders).
  const std::vector<VarId>& boundVariables() const { return bound_; }

 private:
  friend class ProgramBuilder;
  std::vector<std::unique_ptr<Exp>> exps_;
  std::vector<std::unique_ptr<Lam>> lams_;
  std::vector<const Exp*> byLabel_;
  std::vector<const Lam*> lambdas_;
  std::vector<std::string> names_;
  std::vector<VarId> bound_;
  const Exp* root_ = nullptr;
};

using ProgramPtr = std::shared_ptr<const Program>;

// Hand construction of ANF trees; labels are assigned post-order by finish().
class ProgramBuilder {
 public:
  VarId var(std::string_view name);
  const Lam* lam(std::vector<VarId> formals, const Exp* body, bool letBound = false,
                 LamOrigin origin = LamOrigin::Source);
  const Exp* let(VarId binder, const Exp* rhs, const Exp* body);
  const Exp* tailCall(Atom fn, std::vector<Atom> args);
  const Exp* ret(Atom atom);
  const Exp* branch(Atom cond, const Exp* thenBranch, const Exp* elseBranch);

  Atom v(std::string_view name) { return VarRef{var(name)}; }

  ProgramPtr finish(const Exp* root);

 private:
  std::unique_ptr<Program> prog_ = std::make_unique<Program>();
};

std::set<VarId> freeVariables(const Exp& e);
std::set<VarId> freeVariables(const Atom& a);

struct AnfViolation {
  Label label;
  std::string message;
};
std::vector<AnfViolation> validateAnf(const Program& p);

// Surface syntax.

struct SourcePos {
  int line = 1;
  int column = 1;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(SourcePos pos, const std::string& msg);
  SourcePos pos;
};

struct SExpr {
  enum class Kind : std::uint8_t { Symbol, Int, Bool, List };
  Kind kind = Kind::List;
  std::string text;
  std::int64_t intValue = 0;
  bool boolValue = false;
  std::vector<SExpr> items;
  SourcePos pos;

  bool isSymbol(std::string_view s) const { return kind == Kind::Symbol && text == s; }
};

// A program is a sequence of top-level forms.
struct SurfaceTerm {
  std::vector<SExpr> forms;
};

SurfaceTerm parse(std::string_view text);
std::string toString(const SExpr& s);

ProgramPtr aNormalize(const SurfaceTerm& term);
ProgramPtr compile(std::string_view text);

// Surface rendering of an ANF program; normalizing the output gives back the
// same tree up to labels.
std::string print(const Program& p);
std::string atomText(const Program& p, const Atom& a);

// Structural equality ignoring labels.
bool alphaEquivalent(const Program& a, const Program& b);

}  // namespace pdcfa
