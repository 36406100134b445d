#include "psolv/psi_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "psolv/kernels.hpp"

namespace psolv {

namespace {

double default_tau(const ScalarField& f, double tau_zero) {
  if (tau_zero >= 0.0) return tau_zero;
  double m = 0.0;
  for (double x : f.v) m = std::max(m, std::abs(x));
  return 1e-12 * m;
}

}  // namespace

SignPartition sign_partition(const ScalarField& f, double tau_zero) {
  f.grid.validate();
  f.time.validate();
  const double tau = default_tau(f, tau_zero);
  const std::size_t nt = f.time.n_t, nodes = f.grid.nodes();

  SignPartition part;
  part.grid = f.grid;
  part.time = f.time;
  part.tau_zero = tau;
  part.label.assign(nt * nodes, 0);

  // Per node: forward sweep for "positive somewhere <= t", backward sweep for
  // "negative somewhere >= t". Witness times are kept for violation reports.
  std::vector<double> first_pos(nodes), last_neg(nodes);
  constexpr double kNone = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t m = 0; m < nodes; ++m) {
    first_pos[m] = kNone;
    last_neg[m] = kNone;
  }

  std::vector<signed char> pos_seen(nt * nodes, 0), neg_seen(nt * nodes, 0);
  for (std::size_t i = 0; i < nt; ++i) {
    const double* sl = f.slice(i);
    for (std::size_t m = 0; m < nodes; ++m) {
      const bool p = sl[m] > tau;
      const bool prev = i > 0 && pos_seen[(i - 1) * nodes + m];
      pos_seen[i * nodes + m] = static_cast<signed char>(p || prev);
      if (p && std::isnan(first_pos[m])) first_pos[m] = f.time.t(i);
    }
  }
  for (std::size_t ii = nt; ii-- > 0;) {
    const double* sl = f.slice(ii);
    for (std::size_t m = 0; m < nodes; ++m) {
      const bool n = sl[m] < -tau;
      const bool next = ii + 1 < nt && neg_seen[(ii + 1) * nodes + m];
      neg_seen[ii * nodes + m] = static_cast<signed char>(n || next);
      if (n && std::isnan(last_neg[m])) last_neg[m] = f.time.t(ii);
    }
  }

  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < f.grid.n_x; ++j) {
      for (std::size_t k = 0; k < f.grid.n_xi; ++k) {
        const std::size_t m = j * f.grid.n_xi + k;
        const bool p = pos_seen[i * nodes + m];
        const bool n = neg_seen[i * nodes + m];
        signed char lab = 0;
        if (p && n) {
          lab = +1;  // X_+ membership wins; the conflict is reported below
          part.violations.push_back(SignViolation{
              i, j, k, f.time.t(i), f.grid.x(j), f.grid.xi(k), first_pos[m],
              last_neg[m]});
        } else if (p) {
          lab = +1;
        } else if (n) {
          lab = -1;
        }
        part.label[part.index(i, j, k)] = lab;
      }
    }
  }
  return part;
}

PsibarReport check_psibar(const ScalarField& f, double tau_zero) {
  f.grid.validate();
  f.time.validate();
  PsibarReport rep;
  rep.tau_zero = default_tau(f, tau_zero);
  const double tau = rep.tau_zero;
  const std::size_t nt = f.time.n_t, nodes = f.grid.nodes();

  for (std::size_t j = 0; j < f.grid.n_x; ++j) {
    for (std::size_t k = 0; k < f.grid.n_xi; ++k) {
      const std::size_t m = j * f.grid.n_xi + k;
      std::size_t pos_at = nt;  // first index with f > tau, nt = none yet
      for (std::size_t i = 0; i < nt; ++i) {
        const double val = f.v[i * nodes + m];
        if (pos_at == nt) {
          if (val > tau) pos_at = i;
        } else if (val < -tau) {
          rep.violations.push_back(PsibarViolation{
              f.time.t(pos_at), f.grid.x(j), f.grid.xi(k), f.time.t(i)});
          break;  // first offending pair per node is enough
        }
      }
    }
  }
  rep.holds = rep.violations.empty();
  return rep;
}

SignedDistanceField signed_distance(const SignPartition& part) {
  const PhaseGrid& g = part.grid;
  const std::size_t nt = part.time.n_t, nodes = g.nodes();
  const double cap = 1.0 / std::sqrt(g.h);

  SignedDistanceField out;
  out.cap = cap;
  out.delta0 = ScalarField::zeros(g, part.time);
  out.d0 = ScalarField::zeros(g, part.time);
  out.slice_zero_empty.assign(nt, 0);

  // Node coordinates, precomputed once (x-major layout like the fields).
  std::vector<double> cx(nodes), cxi(nodes);
  for (std::size_t j = 0; j < g.n_x; ++j)
    for (std::size_t k = 0; k < g.n_xi; ++k) {
      cx[j * g.n_xi + k] = g.x(j);
      cxi[j * g.n_xi + k] = g.xi(k);
    }

  std::vector<double> zx, zxi;
  zx.reserve(nodes);
  zxi.reserve(nodes);
  const auto& K = kernels::ops();

  for (std::size_t i = 0; i < nt; ++i) {
    const signed char* lab = part.label.data() + i * nodes;
    zx.clear();
    zxi.clear();
    for (std::size_t m = 0; m < nodes; ++m)
      if (lab[m] == 0) {
        zx.push_back(cx[m]);
        zxi.push_back(cxi[m]);
      }
    // A +/- pair of adjacent nodes is a sign crossing the node set missed
    // (grids with an even axis have no node on the crossing); its midpoint
    // belongs to X_0, otherwise delta0 jumps by two caps across one cell.
    for (std::size_t j = 0; j < g.n_x; ++j)
      for (std::size_t k = 0; k < g.n_xi; ++k) {
        const std::size_t m = j * g.n_xi + k;
        if (j + 1 < g.n_x && lab[m] * lab[m + g.n_xi] < 0) {
          zx.push_back(0.5 * (cx[m] + cx[m + g.n_xi]));
          zxi.push_back(cxi[m]);
        }
        if (k + 1 < g.n_xi && lab[m] * lab[m + 1] < 0) {
          zx.push_back(cx[m]);
          zxi.push_back(0.5 * (cxi[m] + cxi[m + 1]));
        }
      }
    const bool empty = zx.empty();
    out.slice_zero_empty[i] = static_cast<char>(empty);

    double* d0 = out.d0.slice(i);
    double* del = out.delta0.slice(i);
    parallel_for(nodes, [&](std::size_t b, std::size_t e) {
      for (std::size_t m = b; m < e; ++m) {
        if (lab[m] == 0) {
          d0[m] = 0.0;
          del[m] = 0.0;
          continue;
        }
        double d;
        if (empty) {
          d = std::numeric_limits<double>::infinity();
        } else {
          d = std::sqrt(K.min_dist2(cx[m], cxi[m], zx.data(), zxi.data(),
                                    zx.size()));
        }
        d0[m] = d;
        del[m] = static_cast<double>(lab[m]) * std::min(d, cap);
      }
    });
  }
  return out;
}

TraceResult trace_bicharacteristic(const ComplexSymbol& q, double x0, double xi0,
                                   const TraceOptions& opt) {
  if (!(opt.step > 0.0) || opt.max_steps == 0)
    throw Error("trace_bicharacteristic: bad step/max_steps");

  auto re_q = [&](double x, double xi) { return q(x, xi).real(); };
  // Hamiltonian field of Re q by central differences of the callback.
  auto field = [&](double x, double xi, double& vx, double& vxi) {
    const double d = opt.fd_step;
    vx = (re_q(x, xi + d) - re_q(x, xi - d)) / (2.0 * d);
    vxi = -(re_q(x + d, xi) - re_q(x - d, xi)) / (2.0 * d);
  };

  const cplx q0 = q(x0, xi0);
  if (std::abs(q0.real()) > opt.tau_char)
    throw Error("trace_bicharacteristic: start point is not characteristic");
  {
    double vx, vxi;
    field(x0, xi0, vx, vxi);
    if (std::hypot(vx, vxi) < opt.eps_grad)
      throw Error("trace_bicharacteristic: Hamiltonian field degenerate at start");
  }

  TraceResult res;
  res.path.push_back(TracePoint{x0, xi0, q0.real(), q0.imag()});

  double x = x0, xi = xi0;
  int last_sign = 0;
  double last_neg_val = 0.0;
  if (q0.imag() > opt.tau_zero) last_sign = +1;
  if (q0.imag() < -opt.tau_zero) {
    last_sign = -1;
    last_neg_val = q0.imag();
  }

  for (std::size_t s = 0; s < opt.max_steps; ++s) {
    double k1x, k1xi, k2x, k2xi, k3x, k3xi, k4x, k4xi;
    const double dt = opt.step;
    field(x, xi, k1x, k1xi);
    if (std::hypot(k1x, k1xi) < opt.eps_grad) {
      res.status = TraceStatus::Degenerate;
      return res;
    }
    field(x + 0.5 * dt * k1x, xi + 0.5 * dt * k1xi, k2x, k2xi);
    field(x + 0.5 * dt * k2x, xi + 0.5 * dt * k2xi, k3x, k3xi);
    field(x + dt * k3x, xi + dt * k3xi, k4x, k4xi);
    x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    xi += dt / 6.0 * (k1xi + 2.0 * k2xi + 2.0 * k3xi + k4xi);

    if (x < opt.x_lo || x > opt.x_hi || xi < opt.xi_lo || xi > opt.xi_hi) {
      res.status = TraceStatus::Exited;
      return res;
    }

    const cplx qv = q(x, xi);
    res.path.push_back(TracePoint{x, xi, qv.real(), qv.imag()});
    res.max_re_drift = std::max(res.max_re_drift, std::abs(qv.real() - q0.real()));

    const double im = qv.imag();
    if (im > opt.tau_zero) {
      if (last_sign == -1)
        res.events.push_back(SignChangeEvent{s + 1, x, xi, last_neg_val, im});
      last_sign = +1;
    } else if (im < -opt.tau_zero) {
      last_sign = -1;
      last_neg_val = im;
    }
  }
  res.status = TraceStatus::Completed;
  return res;
}

}  // namespace psolv
