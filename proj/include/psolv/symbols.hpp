#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psolv/phase_grid.hpp"

namespace psolv {

// Named scalar model symbols used across the test corpus and the CLI:
//   zero               f = 0
//   coordinate_x       f = x
//   t_times_g          f = t (1 + tanh xi)          one-sided, compliant
//   minus_t_times_g    f = -t (1 + tanh xi)         sign flips + -> -, violating
//   xsq_minus_xi_bump  f = x^2 - exp(-xi^2)         t-independent, compliant
//   t_ramp_bump        f = t exp(-x^2 - xi^2)       compliant ramp
// Unknown names throw Error.
ScalarSymbol builtin_symbol(const std::string& name);
std::vector<std::string> builtin_names();

// Seeded band-limited random symbol of the one-sided form a(w) + t c(w) with
// c >= 0, so the sign along every upward t-line changes at most once from -
// to +. Smooth, |f| = O(1) on the standard windows.
ScalarSymbol random_compliant_symbol(std::uint64_t seed);

struct NamedSymbol {
  std::string name;
  ScalarSymbol fn;
};

// The compliant builtins plus n_random seeded random symbols; the standard
// corpus for the signed-distance / weight / estimate acceptance runs.
std::vector<NamedSymbol> compliance_corpus(std::size_t n_random,
                                           std::uint64_t seed);

}  // namespace psolv
