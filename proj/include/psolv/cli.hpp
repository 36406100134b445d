#pragma once

namespace psolv {

// Full command-line front end. Exit codes: 0 pass, 1 verdict failure,
// 2 configuration error, 3 runtime error.
int run_cli(int argc, const char* const* argv);

}  // namespace psolv
