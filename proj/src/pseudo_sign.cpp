#include "psolv/pseudo_sign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace psolv {

namespace {

void validate_inputs(const ScalarField& delta0, const ScalarField& m, double T) {
  if (delta0.v.size() != m.v.size())
    throw Error("build_rho: delta0 and m shapes disagree");
  if (!(T > 0.0)) throw Error("build_rho: T must be positive");
  const TimeGrid& tg = delta0.time;
  const double tol = 1e-12 * std::max(1.0, T);
  if (tg.t_min > -T + tol || tg.t_max < T - tol)
    throw Error("build_rho: window [-T, T] not contained in the time grid");
}

// Cumulative trapezoid integral of the node's m time-series.
void cumtrap(const double* m, std::size_t nt, std::size_t stride, double dt,
             double* I) {
  I[0] = 0.0;
  for (std::size_t i = 1; i < nt; ++i)
    I[i] = I[i - 1] + 0.5 * dt * (m[(i - 1) * stride] + m[i * stride]);
}

}  // namespace

PseudoSign build_rho(const ScalarField& delta0, const ScalarField& m, double T) {
  validate_inputs(delta0, m, T);
  const TimeGrid& tg = delta0.time;
  const std::size_t nt = tg.n_t, nodes = delta0.grid.nodes();
  const double tol = 1e-12 * std::max(1.0, T);

  PseudoSign out;
  out.T = T;
  out.rho = ScalarField::zeros(delta0.grid, tg);
  out.B = ScalarField::zeros(delta0.grid, tg);

  parallel_for(nodes, [&](std::size_t b, std::size_t e) {
    std::vector<double> I(nt);
    for (std::size_t w = b; w < e; ++w) {
      cumtrap(m.v.data() + w, nt, nodes, tg.dt(), I.data());
      double run = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < nt; ++i) {
        const double t = tg.t(i);
        const double d = delta0.v[i * nodes + w];
        if (t < -T - tol || t > T + tol) {
          out.rho.v[i * nodes + w] = -d;
          continue;  // B stays 0
        }
        run = std::max(run, d - I[i] / (2.0 * T) - m.v[i * nodes + w]);
        const double rho = run + I[i] / (2.0 * T) - d;
        out.rho.v[i * nodes + w] = rho;
        out.B.v[i * nodes + w] = d + rho;
      }
    }
  });
  return out;
}

PseudoSign brute_force_rho(const ScalarField& delta0, const ScalarField& m,
                           double T) {
  validate_inputs(delta0, m, T);
  const TimeGrid& tg = delta0.time;
  const std::size_t nt = tg.n_t, nodes = delta0.grid.nodes();
  const double tol = 1e-12 * std::max(1.0, T);

  PseudoSign out;
  out.T = T;
  out.rho = ScalarField::zeros(delta0.grid, tg);
  out.B = ScalarField::zeros(delta0.grid, tg);

  std::vector<double> I(nt);
  for (std::size_t w = 0; w < nodes; ++w) {
    cumtrap(m.v.data() + w, nt, nodes, tg.dt(), I.data());
    for (std::size_t i = 0; i < nt; ++i) {
      const double t = tg.t(i);
      const double d = delta0.v[i * nodes + w];
      if (t < -T - tol || t > T + tol) {
        out.rho.v[i * nodes + w] = -d;
        continue;
      }
      double sup = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s <= i; ++s) {
        if (tg.t(s) < -T - tol) continue;
        sup = std::max(sup, delta0.v[s * nodes + w] - d +
                                (I[i] - I[s]) / (2.0 * T) -
                                m.v[s * nodes + w]);
      }
      out.rho.v[i * nodes + w] = sup;
      out.B.v[i * nodes + w] = d + sup;
    }
  }
  return out;
}

}  // namespace psolv
