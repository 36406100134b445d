#include "psolv/system_algebra.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"

namespace psolv {

namespace {

// Rank split of one matrix: singular values below rank_tol * sigma_max count
// as zero; kernel = trailing right singular vectors, cokernel basis (ker P*)
// = trailing left singular vectors.
struct RankSplit {
  int rank = 0;
  Eigen::MatrixXcd kernel, cokernel;
  double sigma_max = 0.0;
};

RankSplit rank_split(const Eigen::MatrixXcd& p, double rank_tol) {
  const Eigen::Index n = p.rows();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      p, Eigen::ComputeFullU | Eigen::ComputeFullV);
  RankSplit out;
  out.sigma_max = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  const double cut = rank_tol * std::max(1.0, p.norm());
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > cut) ++out.rank;
  out.kernel = svd.matrixV().rightCols(n - out.rank);
  out.cokernel = svd.matrixU().rightCols(n - out.rank);
  return out;
}

std::vector<cplx> eigenvalues_of(const Eigen::MatrixXcd& p) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(p, false);
  if (es.info() != Eigen::Success)
    throw Error("eigenvalue solve failed");
  std::vector<cplx> out(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) out[i] = es.eigenvalues()(i);
  return out;
}

// Connected components of the eigenvalue list under distance <= radius.
std::vector<std::vector<int>> cluster_indices(const std::vector<cplx>& ev,
                                              double radius) {
  const int n = static_cast<int>(ev.size());
  std::vector<int> root(n);
  for (int i = 0; i < n; ++i) root[i] = i;
  std::function<int(int)> find = [&](int i) {
    while (root[i] != i) i = root[i] = root[root[i]];
    return i;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(ev[i] - ev[j]) <= radius) root[find(i)] = find(j);
  std::vector<std::vector<int>> comps;
  std::vector<int> where(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (where[r] < 0) {
      where[r] = static_cast<int>(comps.size());
      comps.emplace_back();
    }
    comps[where[r]].push_back(i);
  }
  return comps;
}

cplx cluster_center(const std::vector<cplx>& ev, const std::vector<int>& ix) {
  cplx s = 0.0;
  for (int i : ix) s += ev[i];
  return s / static_cast<double>(ix.size());
}

int geo_mult(const Eigen::MatrixXcd& p, cplx lambda, double rank_tol) {
  const Eigen::MatrixXcd shifted =
      p - lambda * Eigen::MatrixXcd::Identity(p.rows(), p.cols());
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
  // cut against the scale of p itself: when lambda is an exact multiple
  // eigenvalue the difference is pure rounding noise, and a cutoff relative
  // to its own sigma_max would promote that noise to full rank
  const double cut = rank_tol * std::max(1.0, p.norm());
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > cut) ++rank;
  return static_cast<int>(p.rows()) - rank;
}

// k-th directional derivative of w -> det P(w) at w0 along nu, central
// differences at steps h and h/2 combined by one Richardson step.
struct DetDerivative {
  cplx value = 0.0;
  double sample_max = 0.0;  // max |det| over the stencil, for the noise floor
};

DetDerivative det_derivative(const MatrixFn& p, const Eigen::VectorXd& w0,
                             const Eigen::VectorXd& nu, int k, double h) {
  auto g = [&](double s) { return p(w0 + s * nu).determinant(); };
  const cplx g0 = g(0.0);
  const cplx gp2 = g(0.5 * h), gm2 = g(-0.5 * h);
  const cplx gp = g(h), gm = g(-h);
  const cplx gpp = g(2.0 * h), gmm = g(-2.0 * h);

  auto diff = [&](double s, cplx f2p, cplx f1p, cplx f1m, cplx f2m) -> cplx {
    switch (k) {
      case 1:
        return (f1p - f1m) / (2.0 * s);
      case 2:
        return (f1p - 2.0 * g0 + f1m) / (s * s);
      case 3:
        return (f2p - 2.0 * f1p + 2.0 * f1m - f2m) / (2.0 * s * s * s);
      default:
        return (f2p - 4.0 * f1p + 6.0 * g0 - 4.0 * f1m + f2m) /
               (s * s * s * s);
    }
  };
  const cplx dh = diff(h, gpp, gp, gm, gmm);
  const cplx dh2 = diff(0.5 * h, gp, gp2, gm2, gm);

  DetDerivative out;
  out.value = (4.0 * dh2 - dh) / 3.0;
  for (cplx v : {g0, gp2, gm2, gp, gm, gpp, gmm})
    out.sample_max = std::max(out.sample_max, std::abs(v));
  return out;
}

// d_nu P at w0, same Richardson scheme as the determinant route.
Eigen::MatrixXcd matrix_derivative(const MatrixFn& p,
                                   const Eigen::VectorXd& w0,
                                   const Eigen::VectorXd& nu, double h) {
  const Eigen::MatrixXcd dh =
      (p(w0 + h * nu) - p(w0 - h * nu)) / (2.0 * h);
  const Eigen::MatrixXcd dh2 =
      (p(w0 + 0.5 * h * nu) - p(w0 - 0.5 * h * nu)) / h;
  return (4.0 * dh2 - dh) / 3.0;
}

std::vector<Eigen::VectorXd> direction_set(Eigen::Index dim) {
  std::vector<Eigen::VectorXd> out;
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(i) = 1.0;
    out.push_back(e);
  }
  std::mt19937_64 rng(0x9e11e7u);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int r = 0; r < 4; ++r) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = nd(rng);
    out.push_back(v.normalized());
  }
  return out;
}

double stencil_weight(int k) {
  switch (k) {
    case 1: return 2.0;
    case 2: return 4.0;
    case 3: return 6.0;
    default: return 16.0;
  }
}

}  // namespace

MultPair multiplicities(const Eigen::MatrixXcd& p, cplx lambda,
                        double cluster_radius, double rank_tol) {
  if (!p.allFinite()) throw Error("multiplicities: non-finite matrix");
  MultPair out;
  double nearest_out = std::numeric_limits<double>::infinity();
  for (cplx ev : eigenvalues_of(p)) {
    const double d = std::abs(ev - lambda);
    if (d <= cluster_radius)
      ++out.alg;
    else
      nearest_out = std::min(nearest_out, d);
  }
  out.geo = geo_mult(p, lambda, rank_tol);
  out.ambiguous = nearest_out <= 2.0 * cluster_radius;
  out.cluster_gap = std::isfinite(nearest_out)
                        ? nearest_out / std::max(cluster_radius, 1e-300)
                        : std::numeric_limits<double>::infinity();
  return out;
}

PrincipalTypeReport principal_type_test(const MatrixFn& p,
                                        const Eigen::VectorXd& w0,
                                        double fd_step, double tol) {
  PrincipalTypeReport rep;
  rep.rank_tol = 1e-8;
  const Eigen::MatrixXcd p0 = p(w0);
  if (!p0.allFinite()) throw Error("principal_type_test: non-finite matrix");

  const RankSplit split = rank_split(p0, rep.rank_tol);
  rep.k = static_cast<int>(p0.rows()) - split.rank;
  if (rep.k == 0) {
    rep.elliptic = true;
    rep.is_pt = true;
    rep.note = "elliptic point: P(w0) has no kernel, principal type is vacuous";
    return rep;
  }
  if (rep.k > 4) {
    rep.indeterminate = true;
    rep.note = "kernel dimension above 4: determinant derivatives unsupported";
    return rep;
  }

  const double eps = std::numeric_limits<double>::epsilon();
  bool det_any = false, bil_any = false;
  for (const Eigen::VectorXd& nu : direction_set(w0.size())) {
    const DetDerivative dd = det_derivative(p, w0, nu, rep.k, fd_step);
    const double noise = 32.0 * eps * dd.sample_max * stencil_weight(rep.k) /
                         std::pow(0.5 * fd_step, rep.k);
    const double threshold = std::max(tol, noise);
    const double cert = std::abs(dd.value);

    const Eigen::MatrixXcd dp = matrix_derivative(p, w0, nu, fd_step);
    const Eigen::MatrixXcd form = split.cokernel.adjoint() * dp * split.kernel;
    Eigen::JacobiSVD<Eigen::MatrixXcd> fsvd(form);
    const double sv_min = fsvd.singularValues()(fsvd.singularValues().size() - 1);
    const double bil_threshold = tol * std::max(1.0, dp.norm());

    if (cert > threshold) det_any = true;
    if (sv_min > bil_threshold) bil_any = true;
    if (rep.witness.size() == 0 || cert > rep.det_derivative) {
      rep.det_derivative = cert;
      rep.det_threshold = threshold;
      rep.witness = nu;
    }
    rep.bilinear_min_sv = std::max(rep.bilinear_min_sv, sv_min);
  }

  rep.is_pt = det_any;
  if (det_any != bil_any) {
    rep.indeterminate = true;
    rep.note = "determinant and bilinear-form routes disagree";
  }
  return rep;
}

CharacteristicsReport constant_characteristics_test(
    const MatrixFn& p, const Eigen::VectorXd& w0, double eps_ball,
    int n_samples, double lambda_window, double tol, std::uint64_t seed) {
  CharacteristicsReport rep;
  const Eigen::MatrixXcd p0 = p(w0);
  const double radius = tol * std::max(1.0, p0.norm());
  const double rank_tol = 1e-8;

  const std::vector<cplx> ev0 = eigenvalues_of(p0);
  std::vector<cplx> centers;
  for (const std::vector<int>& comp : cluster_indices(ev0, radius)) {
    SectionRecord s;
    s.lambda0 = cluster_center(ev0, comp);
    s.alg = static_cast<int>(comp.size());
    s.geo = geo_mult(p0, s.lambda0, rank_tol);
    s.in_window = std::abs(s.lambda0) < lambda_window;
    rep.sections.push_back(s);
    centers.push_back(s.lambda0);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const Eigen::Index dim = w0.size();

  for (int s = 0; s < n_samples && rep.constant && !rep.indeterminate; ++s) {
    Eigen::VectorXd dir(dim);
    for (Eigen::Index i = 0; i < dim; ++i) dir(i) = nd(rng);
    const double len =
        eps_ball * std::pow(ud(rng), 1.0 / static_cast<double>(dim));
    const Eigen::VectorXd w = w0 + len * dir.normalized();

    const Eigen::MatrixXcd pw = p(w);
    const std::vector<cplx> ev = eigenvalues_of(pw);
    std::vector<int> hits(rep.sections.size(), 0);
    for (const std::vector<int>& comp : cluster_indices(ev, radius)) {
      const cplx c = cluster_center(ev, comp);
      // nearest section; flag near-ties between two different sections
      std::size_t best = 0;
      double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
      for (std::size_t i = 0; i < centers.size(); ++i) {
        const double d = std::abs(c - centers[i]);
        if (d < d1) {
          d2 = d1;
          d1 = d;
          best = i;
        } else {
          d2 = std::min(d2, d);
        }
      }
      if (d2 - d1 <= radius && centers.size() > 1) {
        rep.indeterminate = true;
        rep.offending_w = w;
        rep.offending_lambda = c;
        rep.note = "cluster equidistant to two sections";
        break;
      }
      ++hits[best];
      SectionRecord& sec = rep.sections[best];
      if (!sec.in_window) continue;
      const int alg = static_cast<int>(comp.size());
      const int geo = geo_mult(pw, c, rank_tol);
      if (alg != sec.alg || geo != sec.geo) {
        rep.constant = false;
        rep.offending_w = w;
        rep.offending_lambda = c;
        rep.off_alg = alg;
        rep.off_geo = geo;
        rep.off_section = static_cast<int>(best);
        rep.note = "tracked section changed multiplicity";
      }
    }
    for (std::size_t i = 0; i < hits.size() && !rep.indeterminate; ++i) {
      if (!rep.sections[i].in_window || hits[i] == 1) continue;
      rep.constant = false;
      rep.off_section = static_cast<int>(i);
      rep.offending_w = w;
      rep.offending_lambda = rep.sections[i].lambda0;
      rep.note = hits[i] == 0 ? "tracked section lost in the sample"
                              : "tracked section split into several clusters";
      if (hits[i] > 1) rep.off_alg = hits[i];
    }
  }
  return rep;
}

BlockReduction block_reduce(const std::vector<Eigen::MatrixXcd>& path,
                            const std::vector<cplx>& lambda, double tol) {
  if (path.empty() || path.size() != lambda.size())
    throw Error("block_reduce: path and lambda sizes must match");
  BlockReduction out;
  const Eigen::Index n = path[0].rows();

  // constant alg = geo = K along the section first
  const double radius = 1e-6 * std::max(1.0, path[0].norm());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const MultPair mp = multiplicities(path[i], lambda[i], radius, tol);
    if (i == 0) out.dim_k = static_cast<std::size_t>(mp.alg);
    if (mp.alg != mp.geo ||
        static_cast<std::size_t>(mp.alg) != out.dim_k || mp.alg == 0) {
      out.ok = false;
      std::ostringstream os;
      os << "section multiplicity not constant alg=geo at node " << i
         << " (alg " << mp.alg << ", geo " << mp.geo << ")";
      out.note = os.str();
      return out;
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(out.dim_k);

  Eigen::MatrixXcd prev_ker, prev_rest;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const Eigen::MatrixXcd shifted =
        path[i] - lambda[i] * Eigen::MatrixXcd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
        shifted, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXcd ker = svd.matrixV().rightCols(k);
    Eigen::MatrixXcd rest = svd.matrixV().leftCols(n - k);

    // orthogonal Procrustes onto the previous node's frames: basis continuity
    if (i > 0) {
      auto align = [](Eigen::MatrixXcd& b, const Eigen::MatrixXcd& target) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> ps(
            b.adjoint() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
        b = b * (ps.matrixU() * ps.matrixV().adjoint());
      };
      align(ker, prev_ker);
      align(rest, prev_rest);
    }
    prev_ker = ker;
    prev_rest = rest;

    Eigen::MatrixXcd e(n, n);
    e.leftCols(k) = ker;
    e.rightCols(n - k) = rest;

    const Eigen::MatrixXcd t = e.adjoint() * path[i] * e;
    const Eigen::MatrixXcd p12 = t.topRightCorner(k, n - k);
    const Eigen::MatrixXcd p22 = t.bottomRightCorner(n - k, n - k);

    Eigen::JacobiSVD<Eigen::MatrixXcd> s22(p22, Eigen::ComputeFullU |
                                                    Eigen::ComputeFullV);
    const Eigen::VectorXd sv = s22.singularValues();
    if (n > k && (sv(sv.size() - 1) <= tol * sv(0) || sv(0) == 0.0)) {
      out.ok = false;
      std::ostringstream os;
      os << "not principal type on patch: P22 ill-conditioned at node " << i;
      out.note = os.str();
      return out;
    }

    Eigen::MatrixXcd shear = Eigen::MatrixXcd::Identity(n, n);
    if (n > k)
      shear.topRightCorner(k, n - k) = -p12 * s22.solve(
          Eigen::MatrixXcd::Identity(n - k, n - k));
    const Eigen::MatrixXcd q = shear * t;

    out.e.push_back(e);
    out.a.push_back(shear * e.adjoint());
    out.q.push_back(q);
    out.res12.push_back(q.topRightCorner(k, n - k).norm());
    out.res21.push_back(q.bottomLeftCorner(n - k, k).norm());
    out.q11_dev.push_back(
        (q.topLeftCorner(k, k) -
         lambda[i] * Eigen::MatrixXcd::Identity(k, k)).norm());
  }
  return out;
}

MatrixFn companion_system(const ScalarSymbolFn& q,
                          const std::vector<ScalarSymbolFn>& a_low) {
  if (a_low.empty()) throw Error("companion_system: need N >= 1 coefficients");
  const Eigen::Index n = static_cast<Eigen::Index>(a_low.size());
  return [q, a_low, n](const Eigen::VectorXd& w) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    const cplx qv = q(w);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = qv;
    for (Eigen::Index i = 0; i + 1 < n; ++i) m(i, i + 1) = -1.0;
    for (Eigen::Index j = 0; j < n; ++j)
      m(n - 1, j) += a_low[static_cast<std::size_t>(j)](w);
    return m;
  };
}

namespace {

Eigen::VectorXd vec4(double a, double b, double c, double d) {
  Eigen::VectorXd v(4);
  v << a, b, c, d;
  return v;
}

bool matrix_self_adjoint(const Eigen::MatrixXcd& m) {
  return (m - m.adjoint()).norm() <= 1e-12 * std::max(1.0, m.norm());
}

GalleryEntry run_entry(const std::string& name, const MatrixFn& p,
                       const Eigen::VectorXd& w0, bool expected_pt,
                       int expected_cc, double eps_ball = 0.25,
                       double lambda_window = 0.5) {
  GalleryEntry e;
  e.name = name;
  e.w0 = w0;
  e.expected_pt = expected_pt;
  e.expected_cc = expected_cc;
  e.pt = principal_type_test(p, w0);
  e.cc = constant_characteristics_test(p, w0, eps_ball, 40, lambda_window);
  e.self_adjoint = matrix_self_adjoint(p(w0));
  e.diagonalizable = true;
  for (const SectionRecord& s : e.cc.sections)
    if (s.in_window && s.alg != s.geo) e.diagonalizable = false;
  e.matches = !e.pt.indeterminate && e.pt.is_pt == e.expected_pt;
  if (e.expected_cc >= 0)
    e.matches = e.matches && !e.cc.indeterminate &&
                e.cc.constant == (e.expected_cc == 1);
  return e;
}

}  // namespace

std::vector<GalleryEntry> gallery() {
  std::vector<GalleryEntry> out;

  // companion form [[p, p1], [-1, p]] of a double characteristic: p = xi1,
  // p1 = x1 |xi|; principal type at the doubly characteristic points (where
  // p1 = 0), elliptic on the rest of p = 0.
  const MatrixFn popex = [](const Eigen::VectorXd& w) {
    const double x1 = w(0), xi1 = w(2), xi2 = w(3);
    const double nxi = std::hypot(xi1, xi2);
    Eigen::MatrixXcd m(2, 2);
    m << xi1, x1 * nxi, -1.0, xi1;
    return m;
  };
  out.push_back(run_entry("popex-double-char", popex, vec4(0, 0, 0, 1), true, -1));
  out.back().expected_note = "principal type where the subprincipal entry vanishes";
  {
    GalleryEntry e = run_entry("popex-elliptic", popex, vec4(0.7, 0, 0, 1),
                               true, -1);
    e.matches = e.matches && e.pt.elliptic;
    e.expected_note = "p = 0 but p1 != 0: determinant nonzero, elliptic point";
    out.push_back(e);
  }

  // [[xi1, xi2 b0], [0, xi1 + xi2^2/|xi|]] with b0 = x1: eigenvalues xi1 and
  // xi1 + xi2^2/|xi| coincide on xi2 = 0; principal type, not constant
  // characteristics.
  const MatrixFn newex = [](const Eigen::VectorXd& w) {
    const double x1 = w(0), xi1 = w(3), xi2 = w(4), xi3 = w(5);
    const double nxi = std::sqrt(xi1 * xi1 + xi2 * xi2 + xi3 * xi3);
    Eigen::MatrixXcd m(2, 2);
    m << xi1, xi2 * x1, 0.0, xi1 + xi2 * xi2 / nxi;
    return m;
  };
  Eigen::VectorXd w6 = Eigen::VectorXd::Zero(6);
  w6(5) = 1.0;
  out.push_back(run_entry("newex", newex, w6, true, 0));

  // symmetric system [[tau + b xi, (t - ib) xi], [(t + ib) xi, -tau + b xi]]
  // at w = (t, x, tau, xi): with b = 1 diagonalizable and self-adjoint but
  // not principal type; with b = 0 principal type without constant
  // characteristics.
  auto nonsolv = [](double b) {
    return MatrixFn([b](const Eigen::VectorXd& w) {
      const double t = w(0), tau = w(2), xi = w(3);
      Eigen::MatrixXcd m(2, 2);
      m << tau + b * xi, cplx(t, -b) * xi, cplx(t, b) * xi, -tau + b * xi;
      return m;
    });
  };
  {
    GalleryEntry e = run_entry("nonsolvex-b1", nonsolv(1.0),
                               vec4(0, 0, 0, 1), false, 1, 0.2);
    e.matches = e.matches && e.self_adjoint && e.diagonalizable;
    e.expected_note = "diagonalizable and self-adjoint, not principal type";
    out.push_back(e);
  }
  out.push_back(run_entry("nonsolvex-b0", nonsolv(0.0), vec4(0, 0, 0, 1),
                          true, 0, 0.2));

  // [[w1, w2], [w2, -w1]]: eigenvalues +-|w|, multiplicity collapses at 0
  const MatrixFn sympair = [](const Eigen::VectorXd& w) {
    Eigen::MatrixXcd m(2, 2);
    m << w(0), w(1), w(1), -w(0);
    return m;
  };
  out.push_back(run_entry("symmetric-pair", sympair,
                          Eigen::VectorXd::Zero(2), true, 0));

  // [[w1, 1], [w2, w1]]: eigenvalues w1 +- sqrt(w2), algebraic multiplicity
  // not constant, still principal type (first derivative of det in w2)
  const MatrixFn jordan = [](const Eigen::VectorXd& w) {
    Eigen::MatrixXcd m(2, 2);
    m << w(0), 1.0, w(1), w(0);
    return m;
  };
  out.push_back(run_entry("jordan-corner", jordan,
                          Eigen::VectorXd::Zero(2), true, 0));

  // [[w1 + i w2^2, w2], [0, w1 + i w2^2]]: constant algebraic multiplicity 2,
  // geometric multiplicity drops to 1 off w2 = 0
  const MatrixFn shear = [](const Eigen::VectorXd& w) {
    const cplx lam(w(0), w(1) * w(1));
    Eigen::MatrixXcd m(2, 2);
    m << lam, w(1), 0.0, lam;
    return m;
  };
  out.push_back(run_entry("shear-family", shear,
                          Eigen::VectorXd::Zero(2), true, 0));

  return out;
}

std::string to_json(const PrincipalTypeReport& r) {
  nlohmann::json j;
  j["is_pt"] = r.is_pt;
  j["elliptic"] = r.elliptic;
  j["indeterminate"] = r.indeterminate;
  j["kernel_dim"] = r.k;
  j["det_derivative"] = r.det_derivative;
  j["det_threshold"] = r.det_threshold;
  j["bilinear_min_sv"] = r.bilinear_min_sv;
  j["rank_tol"] = r.rank_tol;
  if (r.witness.size()) {
    std::vector<double> w(r.witness.data(), r.witness.data() + r.witness.size());
    j["witness"] = w;
  }
  if (!r.note.empty()) j["note"] = r.note;
  return j.dump();
}

std::string to_json(const CharacteristicsReport& r) {
  nlohmann::json j;
  j["constant"] = r.constant;
  j["indeterminate"] = r.indeterminate;
  nlohmann::json secs = nlohmann::json::array();
  for (const SectionRecord& s : r.sections)
    secs.push_back({{"lambda_re", s.lambda0.real()},
                    {"lambda_im", s.lambda0.imag()},
                    {"alg", s.alg},
                    {"geo", s.geo},
                    {"in_window", s.in_window}});
  j["sections"] = secs;
  if (r.off_section >= 0) {
    j["offending_section"] = r.off_section;
    j["offending_alg"] = r.off_alg;
    j["offending_geo"] = r.off_geo;
  }
  if (!r.note.empty()) j["note"] = r.note;
  return j.dump();
}

std::string to_json(const GalleryEntry& e) {
  nlohmann::json j;
  j["name"] = e.name;
  j["principal_type"] = nlohmann::json::parse(to_json(e.pt));
  j["constant_characteristics"] = nlohmann::json::parse(to_json(e.cc));
  j["expected_principal_type"] = e.expected_pt;
  if (e.expected_cc >= 0)
    j["expected_constant_characteristics"] = e.expected_cc == 1;
  j["self_adjoint"] = e.self_adjoint;
  j["diagonalizable"] = e.diagonalizable;
  j["matches"] = e.matches;
  if (!e.expected_note.empty()) j["expected_note"] = e.expected_note;
  return j.dump();
}

}  // namespace psolv
