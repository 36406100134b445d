#pragma once

#include "psolv/phase_grid.hpp"

namespace psolv {

// rho_T(t,w) = sup over grid times -T <= s <= t of
//     delta0(s,w) - delta0(t,w) + (1/2T) int_s^t m(r,w) dr - m(s,w)
// for |t| <= T (time integrals by the trapezoid rule); outside [-T, T] it is
// set to -delta0 so that B_T = delta0 + rho_T vanishes there. B_T is the
// multiplier symbol: |rho_T| <= m and T dB_T/dt >= m/2 discretely.
struct PseudoSign {
  ScalarField rho;
  ScalarField B;
  double T = 0.0;
};

// O(n_t) per node: the sup decomposes into a running maximum of
// delta0(s) - I(s)/2T - m(s) plus I(t)/2T - delta0(t), I = cumulative m.
PseudoSign build_rho(const ScalarField& delta0, const ScalarField& m, double T);

// Direct double-loop evaluation of the same sup; oracle for build_rho.
PseudoSign brute_force_rho(const ScalarField& delta0, const ScalarField& m,
                           double T);

}  // namespace psolv
