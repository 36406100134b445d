#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "psolv/phase_grid.hpp"

namespace psolv {

// Run configuration shared by every CLI subcommand. Sources, in order of
// precedence: built-in defaults < config file (--config, JSON object or
// key = value lines) < individual command-line overrides. Unknown keys are
// rejected at parse time.
struct RunConfig {
  // Phase-space window. matched_n > 0 requests the matched square grid with
  // that many nodes per axis and overrides the explicit window below.
  std::size_t matched_n = 32;
  double x_min = 0.0, x_max = 0.0;
  double xi_min = 0.0, xi_max = 0.0;
  std::size_t n_x = 0, n_xi = 0;
  double h = 0.1;

  // Time grid, symmetric about 0, with multiplier horizon T.
  double t_half = 1.25;
  std::size_t n_t = 25;
  double T = 1.0;

  // Scalar symbol: "builtin:<name>", "expr:<text>", "file:<path>"; a bare
  // name is shorthand for builtin:<name>.
  std::string symbol = "t_times_g";
  // Optional lower-order matrix term F0 (PSLF matrix field) for verify.
  std::string f0_file;
  // Matrix selection for classify: gallery entry name, "identity", or
  // "file:<path>".
  std::string matrix;
  // Input path for the fields subcommand, plus optional CSV conversion target.
  std::string in_file;
  std::string csv_out;

  // Optional bicharacteristic trace for check-psi: q = trace_re + i trace_im
  // (expressions in x, xi; t is fixed to 0) traced from (trace_x0, trace_xi0).
  std::string trace_re, trace_im;
  double trace_x0 = 0.0, trace_xi0 = 0.0;
  std::size_t trace_steps = 1000;

  std::string out = "out";
  std::uint64_t seed = 20260815;
  std::size_t n_random_trials = 19;
  bool skip_gate = false;
  double margin = 6.0;
  std::size_t bisect_steps = 5;

  // Tolerance overrides (the --tol-* family).
  double tol_rank = 1e-6;    // classification rank / derivative threshold
  double tol_zero = -1.0;    // sign-partition dead zone; < 0 = default
  double tol_slack = 1e-5;   // discrete derivative-bound slack (dbest)
  double tol_resid = 1e-8;   // acceptable lower-order reduction residual

  void validate() const;  // throws Error on out-of-range values
};

// text is a JSON object when it starts with '{', otherwise key = value lines
// ('#' comments). Both paths reject unknown keys with the offending name.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Single key update used for command-line overrides; value syntax matches the
// key = value file format. Dashes in key names are treated as underscores.
void apply_override(RunConfig& c, const std::string& key,
                    const std::string& value);

// Resolved configuration echo embedded into every report.
nlohmann::json config_json(const RunConfig& c);

// Materialized grids and the scalar symbol field.
PhaseGrid config_grid(const RunConfig& c);
TimeGrid config_time(const RunConfig& c);
ScalarField config_symbol_field(const RunConfig& c);

}  // namespace psolv
