#pragma once

#include <vector>

#include "psolv/phase_grid.hpp"

namespace psolv {

// Node eligible for both labels: the sign actually changed from + back to -
// somewhere along t, i.e. the one-sided condition fails at this node.
struct SignViolation {
  std::size_t i, j, k;      // grid indices (t, x, xi)
  double t, x, xi;
  double s_plus, s_minus;   // witness times: f(s_plus) > tau, f(s_minus) < -tau
};

// Time-oriented sign partition. label = +1 when some s <= t has
// f(s,w) > tau_zero, -1 when some s >= t has f(s,w) < -tau_zero, 0 when
// neither. X_+ is an up-set and X_- a down-set in t by construction. Nodes
// eligible for both keep +1 (membership in X_+ wins) and are reported in
// `violations`; callers decide whether that is fatal.
struct SignPartition {
  PhaseGrid grid;
  TimeGrid time;
  double tau_zero = 0.0;
  std::vector<signed char> label;  // (n_t, n_x, n_xi) row-major
  std::vector<SignViolation> violations;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * grid.n_x + j) * grid.n_xi + k;
  }
  signed char at(std::size_t i, std::size_t j, std::size_t k) const {
    return label[index(i, j, k)];
  }
};

// tau_zero < 0 requests the default 1e-12 * max|f|.
SignPartition sign_partition(const ScalarField& f, double tau_zero = -1.0);

// One-sided sign condition in normal form: f(t,w) > tau and s > t imply
// f(s,w) >= -tau. Violations report the first offending pair per node.
struct PsibarViolation {
  double t, x, xi;   // where f > tau
  double witness;    // later time with f < -tau
};
struct PsibarReport {
  bool holds = true;
  double tau_zero = 0.0;
  std::vector<PsibarViolation> violations;
};
PsibarReport check_psibar(const ScalarField& f, double tau_zero = -1.0);

// delta0(t,w) = sgn(t,w) * min(dist(w, X_0(t)), h^{-1/2}) with the node-center
// metric; d0 keeps the raw (uncapped) distance, +infinity on slices where
// X_0(t) is empty. cap = h^{-1/2}.
struct SignedDistanceField {
  ScalarField delta0;
  ScalarField d0;
  double cap = 0.0;
  std::vector<char> slice_zero_empty;  // per time slice
};
SignedDistanceField signed_distance(const SignPartition& part);

// Bicharacteristic tracing of q: RK4 on x' = d(Re q)/dxi, xi' = -d(Re q)/dx
// with central-difference derivatives of the callback. Records the path and
// every minus-to-plus crossing of Im q (dead zone tau_zero).
using ComplexSymbol = std::function<cplx(double x, double xi)>;

enum class TraceStatus { Completed, Exited, Degenerate };

struct TracePoint {
  double x, xi, re_q, im_q;
};
struct SignChangeEvent {
  std::size_t step;
  double x, xi;
  double im_before, im_after;  // last definite negative / first positive value
};
struct TraceOptions {
  double step = 1e-2;
  std::size_t max_steps = 1000;
  double fd_step = 1e-5;
  double tau_char = 1e-8;   // |Re q(start)| must not exceed this
  double eps_grad = 1e-10;  // Hamiltonian degeneracy threshold
  double tau_zero = 1e-12;  // dead zone for Im q sign tracking
  double x_lo = -10.0, x_hi = 10.0, xi_lo = -10.0, xi_hi = 10.0;
};
struct TraceResult {
  TraceStatus status = TraceStatus::Completed;
  std::vector<TracePoint> path;
  std::vector<SignChangeEvent> events;
  double max_re_drift = 0.0;  // max |Re q(path) - Re q(start)|
};
TraceResult trace_bicharacteristic(const ComplexSymbol& q, double x0, double xi0,
                                   const TraceOptions& opt);

}  // namespace psolv
