#pragma once

#include <cstdint>

#include "psolv/pseudo_sign.hpp"
#include "psolv/quantization.hpp"
#include "psolv/weights.hpp"

namespace psolv {

// Model operator P0 = D_t + i f^w(t) Id_N + F0^w(t) on the (t, x) grid, with
// the convention D_t = -i d/dt. Slices hold the quantized symbol at each grid
// time; D_t is applied by 4th-order central differences with one-sided
// closure at the ends (trials vanish near the t-boundary, so the closure
// never sees signal).
struct SpaceTimeOperator {
  PhaseGrid grid;
  TimeGrid time;
  std::size_t N = 1;
  std::vector<OperatorMatrix> f_blocks;   // f^w(t_i), n_x x n_x, Hermitian
  std::vector<OperatorMatrix> f0_blocks;  // F0^w(t_i), (N n_x)^2; empty if F0 = 0
  bool has_f0 = false;

  std::size_t dim() const { return N * grid.n_x; }
};

SpaceTimeOperator assemble_P0(const ScalarField& f);  // scalar case, N = 1
SpaceTimeOperator assemble_P0(const ScalarField& f, const MatrixField& f0);

// Space-time test function: one coefficient vector of length N*n_x per time
// slice, system components stacked block-major like OperatorMatrix.
struct Trial {
  std::string label;
  std::vector<Eigen::VectorXcd> values;
};

// 4th-order first derivative in t of a slice sequence (central stencil,
// one-sided 5-point closure on the outermost two slices per side).
std::vector<Eigen::VectorXcd> time_derivative(
    const std::vector<Eigen::VectorXcd>& u, double dt);

std::vector<Eigen::VectorXcd> apply_P0(const SpaceTimeOperator& p0,
                                       const Trial& u);

// Per-slice Wick quantization of the multiplier symbol B_T; Hermiticity of
// every slice is asserted (B_T is real).
std::vector<OperatorMatrix> build_multiplier(const PseudoSign& sign,
                                             const PhaseGrid& g);

// Fixed diverse corpus: Gaussians and Hermite-modulated Gaussians in x times
// smooth bump windows in t (two windows shifted off-center to weight early
// and late times), plus n_random band-limited random profiles. All profiles
// keep their mass away from the x-window edge; for N > 1 the structured
// trials cycle through the coordinate components and the random ones get
// seeded random component vectors.
std::vector<Trial> trial_corpus(const PhaseGrid& g, const TimeGrid& tg,
                                std::size_t n_random, std::uint64_t seed,
                                std::size_t N = 1);

struct EstimateReport {
  double T = 0.0;
  double h = 1.0;
  std::vector<std::string> trial_labels;
  std::vector<double> lhs_values;  // h^{1/2} (||b u||^2 + ||u||^2)
  std::vector<double> rhs_values;  // Im <P0 u, b u>, time-trapezoid
  double fitted_C0 = 0.0;          // max lhs / (T rhs) over positive-rhs trials
  double fitted_budget = 0.0;      // fitted_C0 * T
  double cs_constant = 0.0;        // max ||u|| h^{1/2} / (T ||P0 u||)
  std::size_t n_negative = 0;      // trials with rhs <= 0
  bool verdict = false;            // all rhs > 0 and fitted_C0 finite
  std::string note;
};

// Windows every trial into |t| <= T, evaluates both sides of the estimate,
// and fits C0. When `conjugation` is non-empty (per-slice quantized E from
// reduce_lower_order), each trial v is replaced by u = E^w v and the pairing
// becomes Im <(E^w)^{-1} P0 E^w v, b v> -- the scalar-multiplier form of the
// conjugated estimate.
EstimateReport verify_propest(const SpaceTimeOperator& p0,
                              const std::vector<OperatorMatrix>& multiplier,
                              const std::vector<Trial>& trials, double T,
                              double h,
                              const std::vector<OperatorMatrix>& conjugation = {});

std::string to_json(const EstimateReport& r);
// CSV rows (trial, lhs, rhs, ratio) with ratio = lhs / (T rhs).
void write_estimate_csv(const std::string& path, const EstimateReport& r);

struct West3Report {
  double h = 1.0;
  double c1 = 0.0;  // min over slices of the minimal generalized Rayleigh
  std::size_t argmin_slice = 0;
  std::vector<double> c1_per_slice;
  bool positive = false;
  std::string note;
};

// Per slice forms W = m^{Wick} and K = h^{1/2}((B^{Wick})* B^{Wick} + Id) and
// minimizes the generalized Rayleigh quotient <Wu,u>/<Ku,u>. The default
// minimizes over the span of interior Gaussian packets (margin nodes from the
// window edge); full_eigensolve uses the whole discrete space, which also
// resolves the periodic-wrap ribbon at the window edge and is only meaningful
// for symbols supported away from it.
West3Report verify_west3(const ScalarField& m, const PseudoSign& sign, double h,
                         bool full_eigensolve = false, double margin = 6.0);

std::string to_json(const West3Report& r);

struct DbestReport {
  double min_margin = 0.0;     // worst-case Rayleigh margin, see below
  double scale = 0.0;          // max m over the field, for relative slack
  std::size_t argmin_pair = 0;
  bool ok = false;
};

// Derivative-term lower bound, quantized: for consecutive interior slices
// (both times inside (-T, T)) the difference quotient of <b(t) u, u> must
// dominate <min(m_i, m_{i+1})^{Wick} u, u> / 2T over the battery span.
// min_margin is the smallest eigenvalue of the compressed operator
// T (b_{i+1} - b_i)/dt - wick(min(m_i, m_{i+1}))/2, nonnegative up to
// quantization slack.
DbestReport check_dbest(const std::vector<OperatorMatrix>& multiplier,
                        const ScalarField& m, double T,
                        const std::vector<Eigen::VectorXcd>& battery,
                        double slack = 1e-5);

struct ReductionReport {
  MatrixField E;
  double residual = 0.0;     // max over nodes of ||D_t E + F0 E|| (Frobenius)
  double min_abs_det = 1.0;  // invertibility certificate over the grid
  bool invertible_ok = true;
  std::string note;
};

// Solves D_t E + F0 E = 0, E(0) = Id pointwise in w: RK4 in t with `substeps`
// stages per grid interval, F0 interpolated between slices by cubic Lagrange.
// Requires a grid node at t = 0. min |det E| < 1e-8 sets invertible_ok =
// false with a warning note; the residual is evaluated with the same
// 4th-order D_t stencil the estimate uses.
ReductionReport reduce_lower_order(const MatrixField& f0,
                                   std::size_t substeps = 32);

std::string to_json(const ReductionReport& r);

// Per-slice Weyl quantization of a matrix field (midpoints interpolated
// linearly in x), packaged as the conjugation argument of verify_propest.
std::vector<OperatorMatrix> quantize_conjugator(const MatrixField& e);

struct PipelineOptions {
  double T_max = 1.0;
  double T_min = 0.0;  // <= 0: max(6 dt, T_max/16)
  std::size_t n_random_trials = 19;
  std::uint64_t seed = 20260815;
  bool skip_gate = false;   // run the estimate even when (Psi-bar) fails
  bool with_west3 = true;
  bool with_dbest = true;
  double margin = 6.0;      // interior-battery margin (grid nodes)
  std::size_t bisect_steps = 5;
  double tau_zero = -1.0;   // gate/partition dead zone; < 0 picks the default
  double dbest_slack = 1e-5;
};

// Full scalar pipeline: (Psi-bar) gate -> signed distance -> weights ->
// pseudo-sign -> multiplier -> estimate, with T found by bisection from
// T_max down to T_min. The estimate report is taken at the largest tested T
// with all-positive right-hand sides (T_corpus); if no tested T passes,
// T_corpus = 0 and the report documents the failures at T_max.
struct PipelineResult {
  PsibarReport gate;
  bool gate_passed = false;
  WeightCertificate certificate;
  EstimateReport estimate;
  West3Report west3;
  DbestReport dbest;
  double T_corpus = 0.0;
};

PipelineResult run_estimate_pipeline(const ScalarField& f,
                                     const PipelineOptions& opt);

}  // namespace psolv
