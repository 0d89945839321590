#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pdcfa/concrete.hpp"
#include "pdcfa/hashing.hpp"
#include "pdcfa/syntax.hpp"

namespace pdcfa {

inline constexpr std::size_t kMaxContext = 4;

struct Policy {
  enum class Kind : std::uint8_t { Mono, OneCfa, PolySplit, KCfa };
  Kind kind = Kind::Mono;
  unsigned k = 0;

  static Policy mono() { return {Kind::Mono, 0}; }
  static Policy oneCfa() { return {Kind::OneCfa, 1}; }
  static Policy polySplit() { return {Kind::PolySplit, 0}; }
  static Policy kCfa(unsigned k);  // throws std::invalid_argument beyond kMaxContext
  // The grid's k: 0 is monovariant, 1 is call-site sensitive.
  static Policy forGrid(unsigned k);

  // Number of previous labels a control state must remember.
  std::size_t historyDepth() const { return kind == Kind::KCfa && k >= 2 ? k - 1 : 0; }
  std::string name() const;
  bool operator==(const Policy&) const = default;
};

std::optional<Policy> parsePolicy(std::string_view name, unsigned k);

enum class AddrKind : std::uint8_t { Mono, Ctx1, Poly, CtxK };

struct AbsAddr {
  VarId var = 0;
  AddrKind kind = AddrKind::Mono;
  std::uint8_t len = 0;
  std::array<Label, kMaxContext> ctx{};

  static AbsAddr mono(VarId v) { return {v, AddrKind::Mono, 0, {}}; }
  static AbsAddr ctx1(VarId v, Label l) { return {v, AddrKind::Ctx1, 1, {l}}; }
  static AbsAddr poly(VarId v, std::optional<Label> l) {
    return l ? AbsAddr{v, AddrKind::Poly, 1, {*l}} : AbsAddr{v, AddrKind::Poly, 0, {}};
  }
  static AbsAddr ctxK(VarId v, std::span<const Label> ls);

  std::span<const Label> context() const { return {ctx.data(), len}; }
  auto operator<=>(const AbsAddr&) const = default;
};

std::size_t hashOf(const AbsAddr& a);
std::string show(const Program& p, const AbsAddr& a);

class AbsEnv {
 public:
  using Entry = std::pair<VarId, AbsAddr>;
  AbsEnv() = default;

  const AbsAddr* find(VarId v) const;
  AbsEnv extended(std::span<const Entry> bindings) const;
  std::span<const Entry> entries() const;
  std::size_t size() const { return rep_ ? rep_->entries.size() : 0; }
  std::size_t hash() const { return rep_ ? rep_->hash : 0; }

  bool operator==(const AbsEnv& o) const;
  std::strong_ordering operator<=>(const AbsEnv& o) const;

  static AbsEnv fromEntries(std::vector<Entry> entries);

 private:
  struct Rep {
    std::vector<Entry> entries;
    std::size_t hash;
  };
  std::shared_ptr<const Rep> rep_;
};

struct AbsClo {
  const Lam* lam;
  AbsEnv env;
  bool operator==(const AbsClo& o) const { return lam == o.lam && env == o.env; }
  std::strong_ordering operator<=>(const AbsClo& o) const {
    if (auto c = lam->label() <=> o.lam->label(); c != 0) return c;
    return env <=> o.env;
  }
};
struct AbsNum {
  auto operator<=>(const AbsNum&) const = default;
};
struct AbsBool {
  auto operator<=>(const AbsBool&) const = default;
};
struct AbsPrim {
  PrimOp op;
  auto operator<=>(const AbsPrim&) const = default;
};

using AbsVal = std::variant<AbsClo, AbsNum, AbsBool, AbsPrim>;
using ValueSet = std::vector<AbsVal>;  // sorted, duplicate free

std::size_t hashOf(const AbsVal& v);
std::string show(const Program& p, const AbsVal& v);

inline std::size_t hashOf(std::uint32_t a) { return hashMix(0x4b, a); }

// Persistent map from keys to non-empty sorted sets, joined pointwise.
template <class K, class V>
class SetMap {
 public:
  using Entry = std::pair<K, std::vector<V>>;

  SetMap() = default;

  const std::vector<V>* find(const K& k) const {
    if (!rep_) return nullptr;
    auto it = lower(k);
    return it != rep_->entries.end() && it->first == k ? &it->second : nullptr;
  }

  SetMap joined(const K& k, const std::vector<V>& vs) const {
    if (vs.empty()) return *this;
    std::vector<Entry> es = rep_ ? rep_->entries : std::vector<Entry>{};
    auto it = std::lower_bound(es.begin(), es.end(), k, [](const Entry& e, const K& x) { return e.first < x; });
    if (it != es.end() && it->first == k) {
      std::vector<V> merged;
      merged.reserve(it->second.size() + vs.size());
      std::set_union(it->second.begin(), it->second.end(), vs.begin(), vs.end(), std::back_inserter(merged));
      if (merged.size() == it->second.size()) return *this;
      it->second = std::move(merged);
    } else {
      es.insert(it, Entry{k, vs});
    }
    return make(std::move(es));
  }

  SetMap joined(const SetMap& o) const {
    if (!o.rep_ || o.rep_ == rep_) return *this;
    if (!rep_) return o;
    std::vector<Entry> es;
    auto a = rep_->entries.begin(), ae = rep_->entries.end();
    auto b = o.rep_->entries.begin(), be = o.rep_->entries.end();
    while (a != ae || b != be) {
      if (b == be || (a != ae && a->first < b->first)) {
        es.push_back(*a++);
      } else if (a == ae || b->first < a->first) {
        es.push_back(*b++);
      } else {
        std::vector<V> merged;
        std::set_union(a->second.begin(), a->second.end(), b->second.begin(), b->second.end(),
                       std::back_inserter(merged));
        es.emplace_back(a->first, std::move(merged));
        ++a;
        ++b;
      }
    }
    return make(std::move(es));
  }

  template <class Pred>
  SetMap restricted(Pred keep) const {
    if (!rep_) return *this;
    std::vector<Entry> es;
    for (const auto& e : rep_->entries)
      if (keep(e.first)) es.push_back(e);
    if (es.size() == rep_->entries.size()) return *this;
    return make(std::move(es));
  }

  std::span<const Entry> entries() const {
    return rep_ ? std::span<const Entry>(rep_->entries) : std::span<const Entry>();
  }
  std::size_t size() const { return rep_ ? rep_->entries.size() : 0; }
  bool empty() const { return size() == 0; }
  std::size_t hash() const { return rep_ ? rep_->hash : 0; }

  bool operator==(const SetMap& o) const {
    if (rep_ == o.rep_) return true;
    if (hash() != o.hash() || size() != o.size()) return false;
    return rep_->entries == o.rep_->entries;
  }
  std::strong_ordering operator<=>(const SetMap& o) const {
    if (rep_ == o.rep_) return std::strong_ordering::equal;
    auto ea = entries(), eb = o.entries();
    return std::lexicographical_compare_three_way(ea.begin(), ea.end(), eb.begin(), eb.end(),
                                                  [](const Entry& x, const Entry& y) {
                                                    if (auto c = x.first <=> y.first; c != 0) return c;
                                                    return std::lexicographical_compare_three_way(
                                                        x.second.begin(), x.second.end(), y.second.begin(),
                                                        y.second.end());
                                                  });
  }

  static SetMap fromEntries(std::vector<Entry> es) {
    std::sort(es.begin(), es.end(), [](const Entry& x, const Entry& y) { return x.first < y.first; });
    std::erase_if(es, [](const Entry& e) { return e.second.empty(); });
    return es.empty() ? SetMap() : make(std::move(es));
  }

 private:
  struct Rep {
    std::vector<Entry> entries;
    std::size_t hash;
  };
  std::shared_ptr<const Rep> rep_;

  typename std::vector<Entry>::const_iterator lower(const K& k) const {
    return std::lower_bound(rep_->entries.begin(), rep_->entries.end(), k,
                            [](const Entry& e, const K& x) { return e.first < x; });
  }

  static SetMap make(std::vector<Entry> es) {
    SetMap m;
    if (es.empty()) return m;
    std::size_t h = es.size();
    for (const auto& e : es) {
      h = hashMix(h, hashOf(e.first));
      for (const auto& v : e.second) h = hashMix(h, hashOf(v));
    }
    m.rep_ = std::make_shared<const Rep>(Rep{std::move(es), h});
    return m;
  }
};

using AbsStore = SetMap<AbsAddr, AbsVal>;

struct AbsFrame {
  VarId binder;
  const Exp* body;
  AbsEnv env;

  bool operator==(const AbsFrame& o) const { return binder == o.binder && body == o.body && env == o.env; }
  std::strong_ordering operator<=>(const AbsFrame& o) const {
    if (auto c = body->label <=> o.body->label; c != 0) return c;
    if (auto c = binder <=> o.binder; c != 0) return c;
    return env <=> o.env;
  }
};
std::size_t hashOf(const AbsFrame& f);

using AbsKont = std::vector<AbsFrame>;  // top first
using History = std::vector<Label>;     // previous labels, most recent first

struct ControlState {
  const Exp* exp;
  AbsEnv env;
  AbsStore store;
  History history;

  bool operator==(const ControlState& o) const {
    return exp == o.exp && env == o.env && store == o.store && history == o.history;
  }
  std::strong_ordering operator<=>(const ControlState& o) const {
    if (auto c = exp->label <=> o.exp->label; c != 0) return c;
    if (auto c = env <=> o.env; c != 0) return c;
    if (auto c = store <=> o.store; c != 0) return c;
    return history <=> o.history;
  }
};
std::size_t hashOf(const ControlState& q);

struct AbsConf {
  const Exp* exp;
  AbsEnv env;
  AbsStore store;
  AbsKont kont;
  History history;

  ControlState control() const { return {exp, env, store, history}; }
  bool operator==(const AbsConf&) const = default;
};

AbsConf absInject(const Exp& e);
ValueSet absAtomicEval(const Atom& a, const AbsEnv& env, const AbsStore& store);
AbsAddr allocAbs(VarId v, Label site, std::optional<Label> splitSite, const History& history, const Policy& policy);
AbsStore storeJoin(const AbsStore& a, const AbsStore& b);

enum class ActionKind : std::uint8_t { Eps, Push, Pop };

struct AbsTransition {
  ActionKind kind;
  std::optional<AbsFrame> frame;  // pushed or popped frame
  ControlState next;
};

// One machine step seen from a control state. top is the frame a return
// would pop; absent means the stack is empty.
std::vector<AbsTransition> stepControl(const ControlState& q, const AbsFrame* top, const Policy& policy);

std::vector<AbsConf> absStep(const AbsConf& c, const Policy& policy);

bool leq(const AbsEnv& a, const AbsEnv& b);
bool leq(const AbsVal& a, const AbsVal& b);
bool leq(const ValueSet& a, const ValueSet& b);
bool leq(const AbsStore& a, const AbsStore& b);
bool leq(const AbsFrame& a, const AbsFrame& b);
bool leq(const AbsKont& a, const AbsKont& b);
bool leq(const AbsConf& a, const AbsConf& b);

// Abstraction of concrete configurations.
AbsAddr alphaAddr(const concrete::AllocRecord& r, const Policy& policy);
AbsEnv alphaEnv(const concrete::Env& env, const concrete::Store& store, const Policy& policy);
AbsVal alphaValue(const concrete::Value& v, const concrete::Store& store, const Policy& policy);
AbsFrame alphaFrame(const concrete::Frame& f, const concrete::Store& store, const Policy& policy);
AbsStore alphaStore(const concrete::Store& store, const Policy& policy);
AbsStore alphaStore(const concrete::Store& store, const std::vector<concrete::Addr>& live, const Policy& policy);
History alphaHistory(const std::vector<Label>& history, const Policy& policy);
AbsConf alpha(const concrete::Conf& c, const Policy& policy);

}  // namespace pdcfa

template <>
struct std::hash<pdcfa::ControlState> {
  std::size_t operator()(const pdcfa::ControlState& q) const { return pdcfa::hashOf(q); }
};
template <>
struct std::hash<pdcfa::AbsFrame> {
  std::size_t operator()(const pdcfa::AbsFrame& f) const { return pdcfa::hashOf(f); }
};
