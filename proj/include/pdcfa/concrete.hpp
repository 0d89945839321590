#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pdcfa/syntax.hpp"

namespace pdcfa::concrete {

using Addr = std::uint32_t;

// How many previous state labels a configuration remembers; bounds the
// context length that abstraction can recover.
inline constexpr std::size_t kHistoryDepth = 8;

class Env {
 public:
  std::optional<Addr> find(VarId v) const;
  Env extended(const std::vector<VarId>& vars, const std::vector<Addr>& addrs) const;
  const std::vector<std::pair<VarId, Addr>>& entries() const { return entries_; }
  bool operator==(const Env&) const = default;

 private:
  std::vector<std::pair<VarId, Addr>> entries_;  // sorted by variable
};

struct Closure {
  const Lam* lam;
  Env env;
  bool operator==(const Closure&) const = default;
};
struct Num {
  std::int64_t value;
  bool operator==(const Num&) const = default;
};
struct Bool {
  bool value;
  bool operator==(const Bool&) const = default;
};
struct PrimVal {
  PrimOp op;
  bool operator==(const PrimVal&) const = default;
};

using Value = std::variant<Closure, Num, Bool, PrimVal>;

std::string show(const Program& p, const Value& v);

// What the allocator knew when it created an address.
struct AllocRecord {
  VarId var;
  Label site;
  std::optional<Label> splitSite;  // call label when binding a let-bound lambda's formal
  std::vector<Label> history;      // previous state labels, most recent first
};

// Append-only store shared between the configurations of one trace; each
// configuration sees a prefix.
class Store {
 public:
  Store();
  std::size_t size() const { return size_; }
  bool contains(Addr a) const { return a < size_; }
  const Value& at(Addr a) const;
  const AllocRecord& record(Addr a) const;
  Store extended(Value v, AllocRecord r) const;

 private:
  struct Data {
    std::vector<Value> values;
    std::vector<AllocRecord> records;
  };
  std::shared_ptr<Data> data_;
  std::size_t size_ = 0;
};

struct Frame {
  VarId binder;
  const Exp* body;
  Env env;
};

class Kont {
 public:
  Kont() = default;
  bool empty() const { return !node_; }
  std::size_t depth() const { return node_ ? node_->depth : 0; }
  const Frame& top() const { return node_->frame; }
  Kont pop() const { return Kont(node_->next); }
  Kont push(Frame f) const;
  std::vector<Frame> frames() const;  // top first

 private:
  struct Node {
    Frame frame;
    std::shared_ptr<const Node> next;
    std::size_t depth;
  };
  explicit Kont(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct Conf {
  const Exp* exp;
  Env env;
  Store store;
  Kont kont;
  std::vector<Label> history;  // previous state labels, most recent first
};

class MachineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Conf inject(const Exp& e);
Value atomicEval(const Atom& a, const Env& env, const Store& store);
Addr alloc(VarId v, const Conf& c);

// Final configurations have no successor. Stuck ones throw MachineError.
std::optional<Conf> step(const Conf& c, std::vector<Value>* output = nullptr);

// The value a final configuration produces.
std::optional<Value> finalValue(const Conf& c);

enum class Outcome { Final, FuelExhausted, Stuck };

struct RunRecord {
  std::vector<Conf> trace;
  Outcome outcome = Outcome::Final;
  std::string reason;
  std::optional<Value> result;
  std::vector<Value> output;
};

RunRecord run(const Exp& e, std::size_t fuel);

void dumpTrace(std::ostream& os, const RunRecord& r);

}  // namespace pdcfa::concrete
