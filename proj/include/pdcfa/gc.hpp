#pragma once

#include <span>
#include <vector>

#include "pdcfa/abstract.hpp"

namespace pdcfa {

using AddrSet = std::vector<AbsAddr>;  // sorted, duplicate free

AddrSet stackRoot(std::span<const AbsFrame> frames);
AddrSet root(const AbsConf& c);
AddrSet adjacent(const AbsAddr& a, const AbsStore& store);

// Everything reachable from roots through closure environments; the roots
// themselves are included whether or not the store binds them.
AddrSet reachableFrom(AddrSet roots, const AbsStore& store);
AddrSet reachableAddrs(const AbsConf& c);

AbsStore restrictStore(const AbsStore& store, const AddrSet& live);
AbsConf collect(const AbsConf& c);
std::vector<AbsConf> gcStep(const AbsConf& c, const Policy& policy);

// Collection for a control state whose stack is known only by its frames.
ControlState collectControl(const ControlState& q, std::span<const AbsFrame> frames);

}  // namespace pdcfa
