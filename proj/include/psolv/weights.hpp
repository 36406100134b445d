#pragma once

#include <cstdint>

#include "psolv/psi_analysis.hpp"

namespace psolv {

// H^{-1/2} = 1 + |delta0| + |f'| / (|f''| + h^{1/4}|f'|^{1/2} + h^{1/2}).
// grad_norm/hess_norm come from diff_w(f, 2); h is read off delta0.grid.h.
ScalarField build_H(const ScalarField& grad_norm, const ScalarField& hess_norm,
                    const ScalarField& delta0);

// M = |f| + |f'| H^{-1/2} + |f''| H^{-1} + h^{1/2} H^{-3/2}.
ScalarField build_M(const ScalarField& f, const ScalarField& grad_norm,
                    const ScalarField& hess_norm, const ScalarField& hinv_sqrt);

// m(t,w) = inf over grid pairs t1 <= t <= t2 of
//   delta0(t2,w) - delta0(t1,w)
//   + max(H^{1/2}<delta0>^2 (t1,w), H^{1/2}<delta0>^2 (t2,w)} / 2,
// computed in O(n_t^2) per node via suffix minima over t2.
ScalarField build_m(const ScalarField& delta0, const ScalarField& hinv_sqrt);

struct WeightBundle {
  ScalarField hinv_sqrt;  // H^{-1/2}
  ScalarField M;
  ScalarField m;
  double h = 1.0;
};

// diff_w(order 2) + build_H + build_M + build_m in one pass.
WeightBundle build_weights(const ScalarField& f, const SignedDistanceField& sd);

struct InequalityCheck {
  bool ok = true;
  double max_violation = 0.0;  // worst positive slack violation found
  double t = 0.0, x = 0.0, xi = 0.0;
};

// Hard pointwise checks carry eps_fp = 1e-9 * max m as roundoff slack;
// fitted constants are reported, not asserted.
struct WeightCertificate {
  double h = 1.0;
  double eps_fp = 0.0;

  InequalityCheck h_lower;     // 1 <= H^{-1/2}
  InequalityCheck h_mid;       // H^{-1/2} <= 1 + |delta0| + h^{-1/4}|f'|^{1/2}
  InequalityCheck h_upper;     // H^{-1/2} <= 3 h^{-1/2} (needs the symbol norm)
  InequalityCheck hhh_lower;   // h^{1/2}<delta0>^2 / 6 <= m
  InequalityCheck hhh_mid;     // m <= H^{1/2}<delta0>^2 / 2
  InequalityCheck hhh_upper;   // H^{1/2}<delta0>^2 / 2 <= <delta0> / 2
  InequalityCheck m_lower;     // h^{1/2} <= M
  InequalityCheck qmax;        // sup_[t1,t2] m <= delta0(t2)-delta0(t1)+m(t1)+m(t2)
  InequalityCheck sign_consistency;  // delta0 * f >= -tau(1+|delta0|)

  double fitted_C3 = 0.0;      // max M * h      (M <= C3 h^{-1})
  double mest0_C0 = 0.0;       // max M H^{3/2} <delta0>^2 / m
  double mest0_t = 0.0, mest0_x = 0.0, mest0_xi = 0.0;
  double slowvar_CH = 0.0;     // H(w) / (H(w0)(1 + H(w0)|w-w0|^2)), sampled pairs
  double temper_CM = 0.0;      // M(w) / (M(w0)(1 + H(w0)|w-w0|^2)^{3/2})
  double m_temper_C = 0.0;     // m(t,w) / (m(t,w0)(1+|w-w0|/<delta0(t,w0)>)^3)
  double lipschitz_m = 0.0;    // adjacent-pair Lipschitz constant of m in w

  double ffact_kappa1 = 0.0;   // advisory: min (f/delta0)/(M H^{1/2}) on the
  std::size_t ffact_nodes = 0; // set <delta0> <= H^{-1/2}/2, |delta0| > 0

  double norm_grad = 0.0;      // max |f'| h^{1/2}  (should be <= 1)
  double norm_hess = 0.0;      // max |f''| h      (should be <= 1)

  bool all_hard_ok() const {
    return h_lower.ok && h_mid.ok && h_upper.ok && hhh_lower.ok && hhh_mid.ok &&
           hhh_upper.ok && m_lower.ok && qmax.ok && sign_consistency.ok;
  }
};

WeightCertificate certify_inequalities(const ScalarField& f,
                                       const SignPartition& part,
                                       const SignedDistanceField& sd,
                                       const WeightBundle& wb,
                                       std::uint64_t seed = 20260815);

}  // namespace psolv
