#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace psolv {

using cplx = std::complex<double>;

inline constexpr const char* kVersion = "0.1.0";

// All recoverable failures (bad grids, malformed files, non-finite samples,
// ill-posed reductions) throw Error; the CLI maps them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thread budget: min(hardware_concurrency, PSOLV_THREADS if set). Always >= 1.
std::size_t thread_budget();

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per worker.
// Falls back to a single inline call when the budget is 1 or n is small.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace psolv
