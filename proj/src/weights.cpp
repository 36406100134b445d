#include "psolv/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "psolv/kernels.hpp"

namespace psolv {

namespace {

void check_same_shape(const ScalarField& a, const ScalarField& b,
                      const char* who) {
  if (a.v.size() != b.v.size() || a.grid.n_x != b.grid.n_x ||
      a.grid.n_xi != b.grid.n_xi || a.time.n_t != b.time.n_t)
    throw Error(std::string(who) + ": field shapes disagree");
}

}  // namespace

ScalarField build_H(const ScalarField& grad_norm, const ScalarField& hess_norm,
                    const ScalarField& delta0) {
  check_same_shape(grad_norm, hess_norm, "build_H");
  check_same_shape(grad_norm, delta0, "build_H");
  const double h = delta0.grid.h;
  const double c4 = std::pow(h, 0.25), c2 = std::sqrt(h);

  ScalarField out = ScalarField::zeros(delta0.grid, delta0.time);
  const std::size_t n = out.v.size();
  std::vector<double> ad0(n);
  for (std::size_t i = 0; i < n; ++i) ad0[i] = std::abs(delta0.v[i]);
  kernels::ops().hinv_sqrt(grad_norm.v.data(), hess_norm.v.data(), ad0.data(),
                           c4, c2, out.v.data(), n);
  return out;
}

ScalarField build_M(const ScalarField& f, const ScalarField& grad_norm,
                    const ScalarField& hess_norm, const ScalarField& hinv_sqrt) {
  check_same_shape(f, grad_norm, "build_M");
  check_same_shape(f, hinv_sqrt, "build_M");
  const double c2 = std::sqrt(f.grid.h);

  ScalarField out = ScalarField::zeros(f.grid, f.time);
  const std::size_t n = out.v.size();
  std::vector<double> af(n);
  for (std::size_t i = 0; i < n; ++i) af[i] = std::abs(f.v[i]);
  kernels::ops().weight_m(af.data(), grad_norm.v.data(), hess_norm.v.data(),
                          hinv_sqrt.v.data(), c2, out.v.data(), n);
  return out;
}

ScalarField build_m(const ScalarField& delta0, const ScalarField& hinv_sqrt) {
  check_same_shape(delta0, hinv_sqrt, "build_m");
  const std::size_t nt = delta0.time.n_t;
  const std::size_t nodes = delta0.grid.nodes();
  ScalarField out = ScalarField::zeros(delta0.grid, delta0.time);

  parallel_for(nodes, [&](std::size_t b, std::size_t e) {
    std::vector<double> d(nt), A(nt), mm(nt);
    for (std::size_t w = b; w < e; ++w) {
      for (std::size_t i = 0; i < nt; ++i) {
        const double del = delta0.v[i * nodes + w];
        const double br = 1.0 + std::abs(del);
        d[i] = del;
        // A = H^{1/2} <delta0>^2 = <delta0>^2 / H^{-1/2}.
        A[i] = br * br / hinv_sqrt.v[i * nodes + w];
      }
      std::fill(mm.begin(), mm.end(), std::numeric_limits<double>::infinity());
      // For each t1, a descending t2 scan keeps suffix = min_{t2' >= t2}
      // V(t1, t2'); folding it into mm[t2] over every t1 <= t2 makes
      // mm[i] = inf over all covering pairs {t1 <= i <= t2} in O(n_t^2).
      for (std::size_t t1 = 0; t1 < nt; ++t1) {
        double suffix = std::numeric_limits<double>::infinity();
        for (std::size_t t2 = nt; t2-- > t1;) {
          const double V = d[t2] - d[t1] + 0.5 * std::max(A[t1], A[t2]);
          suffix = std::min(suffix, V);
          if (suffix < mm[t2]) mm[t2] = suffix;
        }
      }
      for (std::size_t i = 0; i < nt; ++i) out.v[i * nodes + w] = mm[i];
    }
  });
  return out;
}

WeightBundle build_weights(const ScalarField& f, const SignedDistanceField& sd) {
  const DiffW D = diff_w(f, 2);
  WeightBundle wb;
  wb.h = f.grid.h;
  wb.hinv_sqrt = build_H(D.grad_norm, D.hess_norm, sd.delta0);
  wb.M = build_M(f, D.grad_norm, D.hess_norm, wb.hinv_sqrt);
  wb.m = build_m(sd.delta0, wb.hinv_sqrt);
  return wb;
}

namespace {

struct Worst {
  double violation = 0.0;
  std::size_t i = 0, m = 0;
};

void update(Worst& w, double violation, std::size_t i, std::size_t m) {
  if (violation > w.violation) {
    w.violation = violation;
    w.i = i;
    w.m = m;
  }
}

InequalityCheck finish(const Worst& w, double eps, const ScalarField& ref) {
  InequalityCheck c;
  c.max_violation = w.violation;
  c.ok = w.violation <= eps;
  c.t = ref.time.t(w.i);
  c.x = ref.grid.x(w.m / ref.grid.n_xi);
  c.xi = ref.grid.xi(w.m % ref.grid.n_xi);
  return c;
}

}  // namespace

WeightCertificate certify_inequalities(const ScalarField& f,
                                       const SignPartition& part,
                                       const SignedDistanceField& sd,
                                       const WeightBundle& wb,
                                       std::uint64_t seed) {
  const PhaseGrid& g = f.grid;
  const std::size_t nt = f.time.n_t, nodes = g.nodes();
  const double h = wb.h;
  const double sqh = std::sqrt(h);

  const DiffW D = diff_w(f, 2);

  WeightCertificate cert;
  cert.h = h;
  double max_m = 0.0;
  for (double v : wb.m.v) max_m = std::max(max_m, v);
  cert.eps_fp = 1e-9 * max_m;
  const double eps = cert.eps_fp;

  Worst w_hlo, w_hmid, w_hup, w_lo, w_mid, w_up, w_mlo, w_qmax, w_sign;
  double C3 = 0.0, C0 = 0.0;
  std::size_t c0_i = 0, c0_m = 0;
  double ffact = std::numeric_limits<double>::infinity();
  std::size_t ffact_nodes = 0;

  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t m = 0; m < nodes; ++m) {
      const std::size_t idx = i * nodes + m;
      const double hinv = wb.hinv_sqrt.v[idx];
      const double del = sd.delta0.v[idx];
      const double br = 1.0 + std::abs(del);
      const double A = br * br / hinv;  // H^{1/2} <delta0>^2
      const double mv = wb.m.v[idx];
      const double Mv = wb.M.v[idx];
      const double fp = D.grad_norm.v[idx];

      update(w_hlo, 1.0 - hinv, i, m);
      update(w_hmid, hinv - (br + std::sqrt(fp) / std::pow(h, 0.25)), i, m);
      update(w_hup, hinv - 3.0 / sqh, i, m);
      update(w_lo, sqh * br * br / 6.0 - mv, i, m);
      update(w_mid, mv - 0.5 * A, i, m);
      update(w_up, 0.5 * A - 0.5 * br, i, m);
      update(w_mlo, sqh - Mv, i, m);
      update(w_sign, -(del * f.v[idx] + part.tau_zero * br), i, m);

      C3 = std::max(C3, Mv * h);
      const double ratio = Mv * br * br / (hinv * hinv * hinv * mv);
      if (ratio > C0) {
        C0 = ratio;
        c0_i = i;
        c0_m = m;
      }
      cert.norm_grad = std::max(cert.norm_grad, fp * sqh);
      cert.norm_hess = std::max(cert.norm_hess, D.hess_norm.v[idx] * h);

      // Advisory factorization constant on the elliptic-ish set.
      if (std::abs(del) > 0.0 && br <= 0.5 * hinv) {
        ffact = std::min(ffact, (f.v[idx] / del) * hinv / Mv);
        ++ffact_nodes;
      }
    }
  }

  // Quasi-convexity: running max of m over [t1, t2] per node.
  for (std::size_t m = 0; m < nodes; ++m) {
    for (std::size_t t1 = 0; t1 < nt; ++t1) {
      double sup = 0.0;
      for (std::size_t t2 = t1; t2 < nt; ++t2) {
        sup = std::max(sup, wb.m.v[t2 * nodes + m]);
        const double rhs = sd.delta0.v[t2 * nodes + m] -
                           sd.delta0.v[t1 * nodes + m] +
                           wb.m.v[t1 * nodes + m] + wb.m.v[t2 * nodes + m];
        update(w_qmax, sup - rhs, t2, m);
      }
    }
  }

  cert.h_lower = finish(w_hlo, eps, f);
  cert.h_mid = finish(w_hmid, eps, f);
  cert.h_upper = finish(w_hup, eps, f);
  cert.hhh_lower = finish(w_lo, eps, f);
  cert.hhh_mid = finish(w_mid, eps, f);
  cert.hhh_upper = finish(w_up, eps, f);
  cert.m_lower = finish(w_mlo, eps, f);
  cert.qmax = finish(w_qmax, eps, f);
  cert.sign_consistency = finish(w_sign, 1e-15 + eps, f);

  cert.fitted_C3 = C3;
  cert.mest0_C0 = C0;
  cert.mest0_t = f.time.t(c0_i);
  cert.mest0_x = g.x(c0_m / g.n_xi);
  cert.mest0_xi = g.xi(c0_m % g.n_xi);
  cert.ffact_kappa1 = ffact_nodes ? ffact : 0.0;
  cert.ffact_nodes = ffact_nodes;

  // Temperance / slow variation over sampled same-slice pairs.
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_t(0, nt - 1);
  std::uniform_int_distribution<std::size_t> pick_w(0, nodes - 1);
  double CH = 0.0, CM = 0.0, Cm = 0.0;
  const std::size_t samples = 4000;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = pick_t(rng);
    const std::size_t m0 = pick_w(rng), m1 = pick_w(rng);
    const std::size_t i0 = i * nodes + m0, i1 = i * nodes + m1;
    const double x0 = g.x(m0 / g.n_xi), xi0 = g.xi(m0 % g.n_xi);
    const double x1 = g.x(m1 / g.n_xi), xi1 = g.xi(m1 % g.n_xi);
    const double dist2 = (x1 - x0) * (x1 - x0) + (xi1 - xi0) * (xi1 - xi0);

    const double H0 = 1.0 / (wb.hinv_sqrt.v[i0] * wb.hinv_sqrt.v[i0]);
    const double H1 = 1.0 / (wb.hinv_sqrt.v[i1] * wb.hinv_sqrt.v[i1]);
    const double gfac = 1.0 + H0 * dist2;
    CH = std::max(CH, H1 / (H0 * gfac));
    CM = std::max(CM, wb.M.v[i1] / (wb.M.v[i0] * std::pow(gfac, 1.5)));

    const double br0 = 1.0 + std::abs(sd.delta0.v[i0]);
    const double rfac = 1.0 + std::sqrt(dist2) / br0;
    Cm = std::max(Cm, wb.m.v[i1] / (wb.m.v[i0] * rfac * rfac * rfac));
  }
  cert.slowvar_CH = CH;
  cert.temper_CM = CM;
  cert.m_temper_C = Cm;

  // Lipschitz constant of m over adjacent node pairs (worst slice).
  double lip = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    const double* mv = wb.m.slice(i);
    for (std::size_t j = 0; j < g.n_x; ++j)
      for (std::size_t k = 0; k < g.n_xi; ++k) {
        const double v0 = mv[j * g.n_xi + k];
        if (j + 1 < g.n_x)
          lip = std::max(lip, std::abs(v0 - mv[(j + 1) * g.n_xi + k]) / g.dx());
        if (k + 1 < g.n_xi)
          lip = std::max(lip, std::abs(v0 - mv[j * g.n_xi + k + 1]) / g.dxi());
      }
  }
  cert.lipschitz_m = lip;
  return cert;
}

}  // namespace psolv
