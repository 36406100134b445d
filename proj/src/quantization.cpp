#include "psolv/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace psolv {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Shared assembly core. cache holds the symbol at the x midpoints:
// row p = j + k (0 .. 2n_x-2) gives a(mid_p, xi_q) with mid_p = (x_j+x_k)/2.
// Entries (j,k) and (k,j) read the same row with opposite phase signs, so
// real caches yield bit-exact Hermitian matrices.
Eigen::MatrixXcd assemble_weyl(const std::vector<cplx>& cache, const PhaseGrid& g,
                               const std::string& what) {
  const std::size_t n = g.n_x, nq = g.n_xi;
  const double scale = g.dx() * g.dxi() / (2.0 * kPi);
  std::vector<double> xi(nq);
  for (std::size_t q = 0; q < nq; ++q) xi[q] = g.xi(q);

  Eigen::MatrixXcd m(n, n);
  parallel_for(n, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t j = j0; j < j1; ++j) {
      const double xj = g.x(j);
      for (std::size_t k = 0; k < n; ++k) {
        const double delta = xj - g.x(k);
        const cplx* row = cache.data() + (j + k) * nq;
        double re = 0.0, im = 0.0;
        for (std::size_t q = 0; q < nq; ++q) {
          const double th = delta * xi[q];
          const double c = std::cos(th), s = std::sin(th);
          re += row[q].real() * c - row[q].imag() * s;
          im += row[q].real() * s + row[q].imag() * c;
        }
        m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
            scale * cplx(re, im);
      }
    }
  });

  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      if (!std::isfinite(m(j, k).real()) || !std::isfinite(m(j, k).imag()))
        throw Error(what + ": non-finite kernel entry at (" + std::to_string(j) +
                    ", " + std::to_string(k) + ")");
  return m;
}

double midpoint_x(const PhaseGrid& g, std::size_t p) {
  // p = j + k; (x_j + x_k)/2 = x_min + (p/2 + 1/2) dx.
  return g.x_min + (0.5 * static_cast<double>(p) + 0.5) * g.dx();
}

// Regularization evaluated at arbitrary targets (tx_p, txi_q): separable
// discrete convolution with exp(-u^2)/sqrt(pi) per axis, symbol zero-padded
// outside the window.
std::vector<double> regularize_eval(const std::vector<double>& a, const PhaseGrid& g,
                                    const std::vector<double>& tx,
                                    const std::vector<double>& txi) {
  const std::size_t nx = g.n_x, nxi = g.n_xi;
  const std::size_t np = tx.size(), nqt = txi.size();
  const double wx = g.dx() / std::sqrt(kPi), wxi = g.dxi() / std::sqrt(kPi);

  // xi pass: tmp[j][qt] = wxi * sum_l a[j][l] exp(-(txi_qt - xi_l)^2)
  std::vector<double> kxi(nqt * nxi);
  for (std::size_t qt = 0; qt < nqt; ++qt)
    for (std::size_t l = 0; l < nxi; ++l) {
      const double u = txi[qt] - g.xi(l);
      kxi[qt * nxi + l] = std::exp(-u * u);
    }
  std::vector<double> tmp(nx * nqt, 0.0);
  for (std::size_t j = 0; j < nx; ++j)
    for (std::size_t qt = 0; qt < nqt; ++qt) {
      double acc = 0.0;
      const double* arow = a.data() + j * nxi;
      const double* krow = kxi.data() + qt * nxi;
      for (std::size_t l = 0; l < nxi; ++l) acc += arow[l] * krow[l];
      tmp[j * nqt + qt] = wxi * acc;
    }

  // x pass: out[p][qt] = wx * sum_j exp(-(tx_p - x_j)^2) tmp[j][qt]
  std::vector<double> out(np * nqt, 0.0);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t j = 0; j < nx; ++j) {
      const double u = tx[p] - g.x(j);
      const double kj = wx * std::exp(-u * u);
      if (kj == 0.0) continue;
      const double* trow = tmp.data() + j * nqt;
      double* orow = out.data() + p * nqt;
      for (std::size_t qt = 0; qt < nqt; ++qt) orow[qt] += kj * trow[qt];
    }
  }
  return out;
}

// Symbol-weighted bound on the kernel mass the window clips: for each source
// node z the continuous Gaussian mass outside [x_min,x_max] x [xi_min,xi_max].
double tail_bound(const std::vector<double>& a, const PhaseGrid& g) {
  double amax = 0.0;
  for (double v : a) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) return 0.0;
  std::vector<double> inx(g.n_x), inxi(g.n_xi);
  for (std::size_t j = 0; j < g.n_x; ++j)
    inx[j] = 0.5 * (std::erf(g.x_max - g.x(j)) - std::erf(g.x_min - g.x(j)));
  for (std::size_t l = 0; l < g.n_xi; ++l)
    inxi[l] = 0.5 * (std::erf(g.xi_max - g.xi(l)) - std::erf(g.xi_min - g.xi(l)));
  double worst = 0.0;
  for (std::size_t j = 0; j < g.n_x; ++j)
    for (std::size_t l = 0; l < g.n_xi; ++l) {
      const double deficit = 1.0 - inx[j] * inxi[l];
      worst = std::max(worst, std::abs(a[j * g.n_xi + l]) / amax * deficit);
    }
  return worst;
}

void check_slice_size(const std::vector<double>& slice, const PhaseGrid& g,
                      const std::string& what) {
  if (slice.size() != g.nodes())
    throw Error(what + ": slice size " + std::to_string(slice.size()) +
                " does not match grid " + std::to_string(g.nodes()));
}

}  // namespace

OperatorMatrix weyl_quantize(const SliceFn& a, const PhaseGrid& g,
                             const std::string& label) {
  g.validate();
  const std::size_t nm = 2 * g.n_x - 1, nq = g.n_xi;
  std::vector<cplx> cache(nm * nq);
  for (std::size_t p = 0; p < nm; ++p) {
    const double mx = midpoint_x(g, p);
    for (std::size_t q = 0; q < nq; ++q) cache[p * nq + q] = a(mx, g.xi(q));
  }
  OperatorMatrix op;
  op.n_x = g.n_x;
  op.label = label;
  op.m = assemble_weyl(cache, g, "weyl_quantize");
  return op;
}

OperatorMatrix weyl_quantize(const std::vector<double>& slice, const PhaseGrid& g,
                             const std::string& label) {
  g.validate();
  check_slice_size(slice, g, "weyl_quantize");
  const std::size_t nm = 2 * g.n_x - 1, nq = g.n_xi;
  std::vector<cplx> cache(nm * nq);
  for (std::size_t p = 0; p < nm; ++p) {
    const std::size_t j = p / 2;
    for (std::size_t q = 0; q < nq; ++q) {
      double v = slice[j * nq + q];
      if (p % 2 == 1) v = 0.5 * (v + slice[(j + 1) * nq + q]);
      cache[p * nq + q] = v;
    }
  }
  OperatorMatrix op;
  op.n_x = g.n_x;
  op.label = label;
  op.m = assemble_weyl(cache, g, "weyl_quantize");
  return op;
}

OperatorMatrix weyl_quantize_system(const MatrixSliceFn& a, std::size_t N,
                                    const PhaseGrid& g, const std::string& label) {
  g.validate();
  if (N == 0) throw Error("weyl_quantize_system: N == 0");
  const std::size_t nm = 2 * g.n_x - 1, nq = g.n_xi, n = g.n_x;
  std::vector<cplx> buf(N * N), sys(nm * nq * N * N);
  for (std::size_t p = 0; p < nm; ++p) {
    const double mx = midpoint_x(g, p);
    for (std::size_t q = 0; q < nq; ++q) {
      a(mx, g.xi(q), buf.data());
      std::copy(buf.begin(), buf.end(), sys.begin() + (p * nq + q) * N * N);
    }
  }
  OperatorMatrix op;
  op.n_x = n;
  op.sys_dim = N;
  op.label = label;
  op.m.setZero(static_cast<Eigen::Index>(n * N), static_cast<Eigen::Index>(n * N));
  std::vector<cplx> cache(nm * nq);
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t s = 0; s < N; ++s) {
      for (std::size_t p = 0; p < nm; ++p)
        for (std::size_t q = 0; q < nq; ++q)
          cache[p * nq + q] = sys[(p * nq + q) * N * N + r * N + s];
      op.m.block(static_cast<Eigen::Index>(r * n), static_cast<Eigen::Index>(s * n),
                 static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) =
          assemble_weyl(cache, g, "weyl_quantize_system");
    }
  return op;
}

RegularizedField gaussian_regularize(const std::vector<double>& a, const PhaseGrid& g) {
  g.validate();
  check_slice_size(a, g, "gaussian_regularize");
  std::vector<double> tx(g.n_x), txi(g.n_xi);
  for (std::size_t j = 0; j < g.n_x; ++j) tx[j] = g.x(j);
  for (std::size_t l = 0; l < g.n_xi; ++l) txi[l] = g.xi(l);
  RegularizedField out;
  out.v = regularize_eval(a, g, tx, txi);
  out.tail_mass = tail_bound(a, g);
  return out;
}

OperatorMatrix wick_quantize(const std::vector<double>& slice, const PhaseGrid& g,
                             const std::string& label) {
  g.validate();
  check_slice_size(slice, g, "wick_quantize");
  const std::size_t nm = 2 * g.n_x - 1, nq = g.n_xi;
  std::vector<double> tx(nm), txi(nq);
  for (std::size_t p = 0; p < nm; ++p) tx[p] = midpoint_x(g, p);
  for (std::size_t q = 0; q < nq; ++q) txi[q] = g.xi(q);
  const std::vector<double> reg = regularize_eval(slice, g, tx, txi);
  std::vector<cplx> cache(reg.begin(), reg.end());

  OperatorMatrix op;
  op.n_x = g.n_x;
  op.label = label;
  op.tail_mass = tail_bound(slice, g);
  if (op.tail_mass > 1e-3)
    op.label += " [warning: boundary tail mass " + std::to_string(op.tail_mass) + "]";
  op.m = assemble_weyl(cache, g, "wick_quantize");
  return op;
}

OperatorMatrix wick_quantize(const SliceFn& a, const PhaseGrid& g,
                             const std::string& label) {
  g.validate();
  std::vector<double> slice(g.nodes());
  for (std::size_t j = 0; j < g.n_x; ++j)
    for (std::size_t q = 0; q < g.n_xi; ++q) {
      const cplx v = a(g.x(j), g.xi(q));
      if (v.imag() != 0.0)
        throw Error("wick_quantize: complex symbol (Wick path is real-valued)");
      slice[j * g.n_xi + q] = v.real();
    }
  return wick_quantize(slice, g, label);
}

Eigen::VectorXcd CoherentFrame::vector(double y, double eta) const {
  const std::size_t n = grid.n_x;
  Eigen::VectorXcd phi(static_cast<Eigen::Index>(n));
  const double norm = std::pow(kPi, -0.25);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = grid.x(j) - y;
    const double amp = norm * std::exp(-0.5 * u * u);
    phi(static_cast<Eigen::Index>(j)) =
        amp * cplx(std::cos(eta * u), std::sin(eta * u));
  }
  return phi;
}

OperatorMatrix wick_via_frame(const std::vector<double>& slice, const PhaseGrid& g,
                              const std::string& label) {
  g.validate();
  check_slice_size(slice, g, "wick_via_frame");
  const std::size_t n = g.n_x, ny = g.n_x, neta = g.n_xi;
  const double dx = g.dx();
  // S[p][r + n - 1] = sum_q a[p][q] exp(i r dx eta_q)
  std::vector<cplx> S(ny * (2 * n - 1));
  for (std::size_t p = 0; p < ny; ++p)
    for (std::size_t ri = 0; ri < 2 * n - 1; ++ri) {
      const double delta = (static_cast<double>(ri) - static_cast<double>(n - 1)) * dx;
      double re = 0.0, im = 0.0;
      const double* arow = slice.data() + p * neta;
      for (std::size_t q = 0; q < neta; ++q) {
        const double th = delta * g.xi(q);
        re += arow[q] * std::cos(th);
        im += arow[q] * std::sin(th);
      }
      S[p * (2 * n - 1) + ri] = cplx(re, im);
    }

  const double scale = dx * dx * g.dxi() / (2.0 * std::pow(kPi, 1.5));
  OperatorMatrix op;
  op.n_x = n;
  op.label = label;
  op.tail_mass = tail_bound(slice, g);
  op.m.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const double mid = 0.5 * (g.x(j) + g.x(k));
      const double delta = g.x(j) - g.x(k);
      const std::size_t ri = static_cast<std::size_t>(
          static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(k) +
          static_cast<std::ptrdiff_t>(n) - 1);
      cplx acc = 0.0;
      for (std::size_t p = 0; p < ny; ++p) {
        const double u = mid - g.x(p);
        const double w = std::exp(-u * u - 0.25 * delta * delta);
        acc += w * S[p * (2 * n - 1) + ri];
      }
      op.m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = scale * acc;
    }
  return op;
}

Eigen::MatrixXcd CoherentFrame::frame_operator() const {
  std::vector<double> ones(grid.nodes(), 1.0);
  return wick_via_frame(ones, grid, "frame").m;
}

double CoherentFrame::frame_deviation(double margin) const {
  const Eigen::MatrixXcd F = frame_operator();
  const std::size_t n = grid.n_x;
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double edge = std::min(grid.x(j) - grid.x_min, grid.x_max - grid.x(j));
    if (edge < margin) continue;
    for (std::size_t k = 0; k < n; ++k) {
      const cplx want = (j == k) ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
      worst = std::max(worst, std::abs(F(static_cast<Eigen::Index>(j),
                                         static_cast<Eigen::Index>(k)) -
                                       want));
    }
  }
  return worst;
}

std::vector<Eigen::VectorXcd> interior_packets(const PhaseGrid& g, double margin,
                                               std::size_t per_axis) {
  auto centers = [per_axis](double lo, double hi) {
    std::vector<double> c;
    if (lo > hi || per_axis == 1) {
      c.push_back(0.5 * (lo + hi));
      return c;
    }
    for (std::size_t i = 0; i < per_axis; ++i)
      c.push_back(lo + (hi - lo) * static_cast<double>(i) /
                           static_cast<double>(per_axis - 1));
    return c;
  };
  const std::vector<double> ys = centers(g.x_min + margin, g.x_max - margin);
  const std::vector<double> etas = centers(g.xi_min + margin, g.xi_max - margin);

  std::vector<Eigen::VectorXcd> batch;
  for (double y : ys)
    for (double eta : etas) {
      Eigen::VectorXcd v(static_cast<Eigen::Index>(g.n_x));
      for (std::size_t j = 0; j < g.n_x; ++j) {
        const double u = g.x(j) - y;
        v(static_cast<Eigen::Index>(j)) =
            std::exp(-0.5 * u * u) * cplx(std::cos(eta * u), std::sin(eta * u));
      }
      const double nrm = v.norm();
      if (nrm > 0.0) v /= nrm;
      batch.push_back(std::move(v));
    }
  return batch;
}

CompositionReport composition_residual(const SliceFn& a, const SliceFn& b,
                                       const PhaseGrid& g, double predicted_scale,
                                       double margin) {
  const OperatorMatrix A = weyl_quantize(a, g, "a");
  const OperatorMatrix B = weyl_quantize(b, g, "b");
  const OperatorMatrix AB = weyl_quantize(
      [&](double x, double xi) { return a(x, xi) * b(x, xi); }, g, "ab");
  const Eigen::MatrixXcd R = A.m * B.m - AB.m;

  CompositionReport rep;
  for (const Eigen::VectorXcd& v : interior_packets(g, margin))
    rep.residual = std::max(rep.residual, (R * v).norm());
  rep.predicted_scale = predicted_scale;
  rep.ratio = predicted_scale > 0.0 ? rep.residual / predicted_scale : 0.0;
  return rep;
}

double battery_gap(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                   const std::vector<Eigen::VectorXcd>& battery) {
  const std::size_t nb = battery.size();
  if (nb == 0) return 0.0;
  const Eigen::MatrixXcd d = a - b;
  Eigen::MatrixXcd c(nb, nb);
  for (std::size_t j = 0; j < nb; ++j) {
    const Eigen::VectorXcd dv = d * battery[j];
    for (std::size_t i = 0; i < nb; ++i)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          battery[i].dot(dv);
  }
  return spectral_norm(c);
}

Eigen::MatrixXcd orthonormal_span(const std::vector<Eigen::VectorXcd>& battery,
                                  double cutoff) {
  const std::size_t nb = battery.size();
  if (nb == 0) return Eigen::MatrixXcd();
  Eigen::MatrixXcd v(battery[0].size(), nb);
  for (std::size_t c = 0; c < nb; ++c)
    v.col(static_cast<Eigen::Index>(c)) = battery[c];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(v.adjoint() * v);
  const Eigen::VectorXd lam = es.eigenvalues();
  const double keep = cutoff * lam(lam.size() - 1);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(i) > keep) ++r;
  Eigen::MatrixXcd w(nb, r);
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(i) > keep) w.col(c++) = es.eigenvectors().col(i) / std::sqrt(lam(i));
  return v * w;
}

double span_min_eigenvalue(const Eigen::MatrixXcd& herm,
                           const std::vector<Eigen::VectorXcd>& battery,
                           double cutoff) {
  const Eigen::MatrixXcd q = orthonormal_span(battery, cutoff);
  if (q.cols() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(q.adjoint() * herm * q);
  return es.eigenvalues().minCoeff();
}

double hermiticity_defect(const OperatorMatrix& op) {
  const Eigen::Index d = op.m.rows();
  double worst = 0.0, amax = 0.0;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = 0; k < d; ++k) {
      worst = std::max(worst, std::abs(op.m(j, k) - std::conj(op.m(k, j))));
      amax = std::max(amax, std::abs(op.m(j, k)));
    }
  return worst / std::max(1.0, amax);
}

double spectral_norm(const Eigen::MatrixXcd& m) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

void write_operator(const std::string& path, const OperatorMatrix& op,
                    const PhaseGrid& g) {
  const std::size_t d = op.dim();
  PslfHeader h{1, kPslfOperator, 1,
               static_cast<std::uint32_t>(op.n_x),
               static_cast<std::uint32_t>(op.n_x),
               static_cast<std::uint32_t>(op.sys_dim),
               g.x_min, g.x_max, g.xi_min, g.xi_max, 0.0, 0.0, g.h, 0.0};
  std::vector<double> payload;
  payload.reserve(2 * d * d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < d; ++k) {
      const cplx v = op.m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      payload.push_back(v.real());
      payload.push_back(v.imag());
    }
  pslf_write(path, h, payload.data(), payload.size());
}

OperatorMatrix read_operator(const std::string& path, PhaseGrid* g) {
  PslfHeader h{};
  const std::vector<double> payload = pslf_read(path, h);
  if (h.kind != kPslfOperator)
    throw Error("read_operator: not an operator record: " + path);
  if (h.N == 0) throw Error("read_operator: N == 0 in " + path);
  OperatorMatrix op;
  op.n_x = h.n_x;
  op.sys_dim = h.N;
  const std::size_t d = op.dim();
  if (payload.size() != 2 * d * d)
    throw Error("read_operator: payload size mismatch in " + path);
  op.m.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < d; ++k)
      op.m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          cplx(payload[2 * (j * d + k)], payload[2 * (j * d + k) + 1]);
  if (g) {
    g->x_min = h.x_min;
    g->x_max = h.x_max;
    g->n_x = h.n_x;
    g->xi_min = h.xi_min;
    g->xi_max = h.xi_max;
    g->n_xi = h.n_xi;
    g->h = h.h;
  }
  return op;
}

void write_operator_csv(const std::string& path, const OperatorMatrix& op) {
  std::unique_ptr<std::FILE, void (*)(std::FILE*)> fp(
      std::fopen(path.c_str(), "w"), [](std::FILE* f) {
        if (f) std::fclose(f);
      });
  if (!fp) throw Error("write_operator_csv: cannot open " + path);
  std::fprintf(fp.get(), "j,k,re,im\n");
  const std::size_t d = op.dim();
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < d; ++k) {
      const cplx v = op.m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      std::fprintf(fp.get(), "%zu,%zu,%.17g,%.17g\n", j, k, v.real(), v.imag());
    }
}

}  // namespace psolv
