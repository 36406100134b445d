#pragma once

#include <string>

#include "psolv/phase_grid.hpp"

namespace psolv {

// Tiny total arithmetic language over the variables t, x, xi:
//   binary + - * / ^   (usual precedence, ^ binds tightest and right-assoc)
//   unary -
//   exp(e)  tanh(e)  sin(e)  cos(e)  abs(e)  min(e, e)  max(e, e)
//   decimal literals (1, 0.25, 1e-3), parentheses.
// No assignment, no user functions, no side effects; every well-formed
// expression evaluates to a double at every point (IEEE semantics for
// division by zero etc.; the field samplers reject non-finite values).
// Malformed input throws Error with the offset of the offending token.
ScalarSymbol compile_expr(const std::string& src);

// One-shot convenience wrapper around compile_expr.
double eval_expr(const std::string& src, double t, double x, double xi);

}  // namespace psolv
