#pragma once

#include <cstdint>

#include "pdcfa/syntax.hpp"

namespace pdcfa {

// Closed, well-scoped ANF programs of at most maxExps expressions. Calls may
// have the wrong arity or apply non-procedures; such runs simply get stuck.
ProgramPtr randomProgram(std::uint64_t seed, std::size_t maxExps = 25);

}  // namespace pdcfa
