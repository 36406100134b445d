#include "psolv/phase_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <thread>

namespace psolv {

std::size_t thread_budget() {
  std::size_t n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("PSOLV_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && static_cast<std::size_t>(v) < n) n = static_cast<std::size_t>(v);
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers = thread_budget();
  if (workers <= 1 || n < 2 * workers) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    if (b >= n) break;
    const std::size_t e = std::min(n, b + chunk);
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

bool PhaseGrid::matched(double* multiple, double* deviation) const {
  const double prod = dx() * dxi() * static_cast<double>(n_xi);
  const double ratio = prod / (2.0 * M_PI);
  const double nearest = std::round(ratio);
  const double dev = std::abs(ratio - nearest);
  if (multiple) *multiple = nearest;
  if (deviation) *deviation = dev;
  return nearest >= 1.0 && dev <= 1e-9;
}

PhaseGrid PhaseGrid::matched_square(std::size_t n, double h) {
  // Solve 2W/n * pi/W * n = 2*pi for a square window [-W, W]^2:
  // dx = 2W/n, dxi = pi/W gives dx*dxi*n = 2*pi for every W; choosing
  // W = sqrt(pi*n/2) additionally makes the window square (n*dxi = 2W).
  PhaseGrid g;
  const double W = std::sqrt(M_PI * static_cast<double>(n) / 2.0);
  g.x_min = -W;
  g.x_max = W;
  g.n_x = n;
  g.xi_min = -W;
  g.xi_max = W;
  g.n_xi = n;
  g.h = h;
  g.validate();
  return g;
}

void PhaseGrid::validate() const {
  if (n_x == 0 || n_xi == 0) throw Error("PhaseGrid: empty axis");
  if (!(x_max > x_min) || !(xi_max > xi_min))
    throw Error("PhaseGrid: window must have positive extent");
  if (!(h > 0.0) || !(h <= 1.0)) throw Error("PhaseGrid: h must be in (0, 1]");
}

void TimeGrid::validate() const {
  if (n_t == 0) throw Error("TimeGrid: n_t must be >= 1");
  if (n_t == 1) {
    if (t_max < t_min) throw Error("TimeGrid: t_max < t_min");
  } else if (!(t_max > t_min)) {
    throw Error("TimeGrid: t_max must exceed t_min when n_t > 1");
  }
}

void TimeGrid::validate_horizon() const {
  validate();
  if (!(T > 0.0)) throw Error("TimeGrid: horizon T must be positive");
  if (!(t_min <= -T) || !(T <= t_max))
    throw Error("TimeGrid: window [-T, T] must sit inside [t_min, t_max]");
}

TimeGrid TimeGrid::symmetric(double half_width, std::size_t n_t, double T) {
  TimeGrid tg;
  tg.t_min = -half_width;
  tg.t_max = half_width;
  tg.n_t = n_t;
  tg.T = T;
  tg.validate();
  return tg;
}

ScalarField ScalarField::zeros(const PhaseGrid& g, const TimeGrid& tg) {
  g.validate();
  tg.validate();
  ScalarField f;
  f.grid = g;
  f.time = tg;
  f.v.assign(tg.n_t * g.nodes(), 0.0);
  return f;
}

MatrixField MatrixField::zeros(const PhaseGrid& g, const TimeGrid& tg, std::size_t N) {
  g.validate();
  tg.validate();
  if (N == 0) throw Error("MatrixField: N must be >= 1");
  MatrixField f;
  f.grid = g;
  f.time = tg;
  f.N = N;
  f.v.assign(tg.n_t * g.nodes() * N * N, cplx(0.0, 0.0));
  return f;
}

ScalarField sample_scalar(const ScalarSymbol& f, const PhaseGrid& g, const TimeGrid& tg) {
  ScalarField out = ScalarField::zeros(g, tg);
  for (std::size_t i = 0; i < tg.n_t; ++i) {
    const double t = tg.t(i);
    for (std::size_t j = 0; j < g.n_x; ++j) {
      const double x = g.x(j);
      for (std::size_t k = 0; k < g.n_xi; ++k) {
        const double val = f(t, x, g.xi(k));
        if (!std::isfinite(val)) {
          char buf[160];
          std::snprintf(buf, sizeof buf,
                        "sample_scalar: non-finite value at t=%g x=%g xi=%g", t,
                        x, g.xi(k));
          throw Error(buf);
        }
        out.at(i, j, k) = val;
      }
    }
  }
  return out;
}

MatrixField sample_matrix(const MatrixSymbol& a, std::size_t N, const PhaseGrid& g,
                          const TimeGrid& tg) {
  MatrixField out = MatrixField::zeros(g, tg, N);
  std::vector<cplx> buf(N * N);
  for (std::size_t i = 0; i < tg.n_t; ++i) {
    const double t = tg.t(i);
    for (std::size_t j = 0; j < g.n_x; ++j) {
      const double x = g.x(j);
      for (std::size_t k = 0; k < g.n_xi; ++k) {
        a(t, x, g.xi(k), buf.data());
        for (std::size_t e = 0; e < N * N; ++e) {
          if (!std::isfinite(buf[e].real()) || !std::isfinite(buf[e].imag())) {
            char m[160];
            std::snprintf(m, sizeof m,
                          "sample_matrix: non-finite entry %zu at t=%g x=%g xi=%g",
                          e, t, x, g.xi(k));
            throw Error(m);
          }
          out.v[out.index(i, j, k, e / N, e % N)] = buf[e];
        }
      }
    }
  }
  return out;
}

namespace {

// Second-order first derivative along one axis of a slice. stride walks the
// axis, count is its length, lines is the number of parallel lines and
// line_stride steps between them.
void d1_axis(const double* in, double* out, std::size_t count, std::size_t stride,
             std::size_t lines, std::size_t line_stride, double d) {
  const double inv2d = 1.0 / (2.0 * d);
  for (std::size_t l = 0; l < lines; ++l) {
    const double* p = in + l * line_stride;
    double* q = out + l * line_stride;
    q[0] = (-3.0 * p[0] + 4.0 * p[stride] - p[2 * stride]) * inv2d;
    for (std::size_t i = 1; i + 1 < count; ++i)
      q[i * stride] = (p[(i + 1) * stride] - p[(i - 1) * stride]) * inv2d;
    const std::size_t e = count - 1;
    q[e * stride] =
        (3.0 * p[e * stride] - 4.0 * p[(e - 1) * stride] + p[(e - 2) * stride]) * inv2d;
  }
}

// Second-order second derivative along one axis (4-point one-sided closure).
void d2_axis(const double* in, double* out, std::size_t count, std::size_t stride,
             std::size_t lines, std::size_t line_stride, double d) {
  const double invd2 = 1.0 / (d * d);
  for (std::size_t l = 0; l < lines; ++l) {
    const double* p = in + l * line_stride;
    double* q = out + l * line_stride;
    q[0] = (2.0 * p[0] - 5.0 * p[stride] + 4.0 * p[2 * stride] - p[3 * stride]) * invd2;
    for (std::size_t i = 1; i + 1 < count; ++i)
      q[i * stride] =
          (p[(i + 1) * stride] - 2.0 * p[i * stride] + p[(i - 1) * stride]) * invd2;
    const std::size_t e = count - 1;
    q[e * stride] = (2.0 * p[e * stride] - 5.0 * p[(e - 1) * stride] +
                     4.0 * p[(e - 2) * stride] - p[(e - 3) * stride]) *
                    invd2;
  }
}

}  // namespace

DiffW diff_w(const ScalarField& f, int order) {
  if (order != 1 && order != 2) throw Error("diff_w: order must be 1 or 2");
  const PhaseGrid& g = f.grid;
  if (g.n_x < 3 || g.n_xi < 3) throw Error("diff_w: need at least 3 nodes per axis");
  if (order == 2 && (g.n_x < 4 || g.n_xi < 4))
    throw Error("diff_w: order 2 needs at least 4 nodes per axis");

  DiffW D;
  D.order = order;
  D.fx = ScalarField::zeros(g, f.time);
  D.fxi = ScalarField::zeros(g, f.time);
  D.grad_norm = ScalarField::zeros(g, f.time);
  if (order == 2) {
    D.fxx = ScalarField::zeros(g, f.time);
    D.fxixi = ScalarField::zeros(g, f.time);
    D.fxxi = ScalarField::zeros(g, f.time);
    D.hess_norm = ScalarField::zeros(g, f.time);
  }

  const std::size_t nx = g.n_x, nxi = g.n_xi;
  for (std::size_t i = 0; i < f.time.n_t; ++i) {
    const double* in = f.slice(i);
    // x-derivatives: axis stride n_xi, lines are xi-columns (stride 1).
    d1_axis(in, D.fx.slice(i), nx, nxi, nxi, 1, g.dx());
    // xi-derivatives: axis stride 1, lines are x-rows (stride n_xi).
    d1_axis(in, D.fxi.slice(i), nxi, 1, nx, nxi, g.dxi());
    if (order == 2) {
      d2_axis(in, D.fxx.slice(i), nx, nxi, nxi, 1, g.dx());
      d2_axis(in, D.fxixi.slice(i), nxi, 1, nx, nxi, g.dxi());
      // Mixed partial: d/dxi applied to f_x (both stencils second order).
      d1_axis(D.fx.slice(i), D.fxxi.slice(i), nxi, 1, nx, nxi, g.dxi());
    }
    double* gn = D.grad_norm.slice(i);
    const double* px = D.fx.slice(i);
    const double* pxi = D.fxi.slice(i);
    for (std::size_t m = 0; m < g.nodes(); ++m)
      gn[m] = std::hypot(px[m], pxi[m]);
    if (order == 2) {
      double* hn = D.hess_norm.slice(i);
      const double* pxx = D.fxx.slice(i);
      const double* pxixi = D.fxixi.slice(i);
      const double* pxxi = D.fxxi.slice(i);
      for (std::size_t m = 0; m < g.nodes(); ++m)
        hn[m] = std::sqrt(pxx[m] * pxx[m] + 2.0 * pxxi[m] * pxxi[m] +
                          pxixi[m] * pxixi[m]);
    }
  }
  return D;
}

// ---------------------------------------------------------------------------
// PSLF I/O

namespace {

constexpr char kMagic[8] = {'P', 'S', 'L', 'F', 'I', 'E', 'L', 'D'};
constexpr std::uint32_t kVersionTag = 1;

static_assert(std::endian::native == std::endian::little,
              "PSLF writer assumes a little-endian host");

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void pslf_write(const std::string& path, const PslfHeader& h, const double* payload,
                std::size_t n) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("pslf_write: cannot open " + path);
  if (std::fwrite(kMagic, 1, 8, fp.get()) != 8 ||
      std::fwrite(&h.version, 4, 6, fp.get()) != 6 ||
      std::fwrite(&h.x_min, 8, 8, fp.get()) != 8 ||
      std::fwrite(payload, 8, n, fp.get()) != n)
    throw Error("pslf_write: short write to " + path);
}

std::vector<double> pslf_read(const std::string& path, PslfHeader& h) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error("pslf_read: cannot open " + path);
  char magic[8];
  if (std::fread(magic, 1, 8, fp.get()) != 8)
    throw Error("pslf_read: truncated header in " + path);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw Error("pslf_read: bad magic in " + path);
  if (std::fread(&h.version, 4, 6, fp.get()) != 6 ||
      std::fread(&h.x_min, 8, 8, fp.get()) != 8)
    throw Error("pslf_read: truncated header in " + path);
  if (h.version != kVersionTag)
    throw Error("pslf_read: unsupported version in " + path);
  std::vector<double> payload;
  double buf[4096];
  for (;;) {
    const std::size_t got = std::fread(buf, 8, 4096, fp.get());
    payload.insert(payload.end(), buf, buf + got);
    if (got < 4096) break;
  }
  for (double d : payload)
    if (!std::isfinite(d)) throw Error("pslf_read: non-finite payload in " + path);
  return payload;
}

void write_field(const std::string& path, const ScalarField& f) {
  PslfHeader h{kVersionTag, kPslfScalar,
               static_cast<std::uint32_t>(f.time.n_t),
               static_cast<std::uint32_t>(f.grid.n_x),
               static_cast<std::uint32_t>(f.grid.n_xi), 1,
               f.grid.x_min, f.grid.x_max, f.grid.xi_min, f.grid.xi_max,
               f.time.t_min, f.time.t_max, f.grid.h, f.time.T};
  pslf_write(path, h, f.v.data(), f.v.size());
}

void write_field(const std::string& path, const MatrixField& f) {
  PslfHeader h{kVersionTag, kPslfMatrix,
               static_cast<std::uint32_t>(f.time.n_t),
               static_cast<std::uint32_t>(f.grid.n_x),
               static_cast<std::uint32_t>(f.grid.n_xi),
               static_cast<std::uint32_t>(f.N),
               f.grid.x_min, f.grid.x_max, f.grid.xi_min, f.grid.xi_max,
               f.time.t_min, f.time.t_max, f.grid.h, f.time.T};
  // std::complex<double> is layout-compatible with double[2] (re, im).
  pslf_write(path, h, reinterpret_cast<const double*>(f.v.data()), 2 * f.v.size());
}

AnyField read_field(const std::string& path) {
  PslfHeader h{};
  const std::vector<double> payload = pslf_read(path, h);
  if (h.kind != kPslfScalar && h.kind != kPslfMatrix)
    throw Error("read_field: unsupported kind in " + path);

  PhaseGrid g;
  g.x_min = h.x_min;
  g.x_max = h.x_max;
  g.n_x = h.n_x;
  g.xi_min = h.xi_min;
  g.xi_max = h.xi_max;
  g.n_xi = h.n_xi;
  g.h = h.h;
  g.validate();
  TimeGrid tg;
  tg.t_min = h.t_min;
  tg.t_max = h.t_max;
  tg.n_t = h.n_t;
  tg.T = h.T;
  tg.validate();

  AnyField out;
  out.kind = h.kind;
  if (h.kind == kPslfMatrix && h.N == 0)
    throw Error("read_field: matrix kind with N == 0");
  const std::size_t expect =
      h.kind == kPslfScalar
          ? static_cast<std::size_t>(h.n_t) * g.nodes()
          : static_cast<std::size_t>(h.n_t) * g.nodes() * h.N * h.N * 2;
  // A well-formed file ends exactly at the payload boundary.
  if (payload.size() < expect)
    throw Error("read_field: truncated payload in " + path);
  if (payload.size() > expect)
    throw Error("read_field: trailing bytes in " + path);
  if (h.kind == kPslfScalar) {
    out.scalar = ScalarField::zeros(g, tg);
    std::copy(payload.begin(), payload.end(), out.scalar.v.begin());
  } else {
    out.matrix = MatrixField::zeros(g, tg, h.N);
    // std::complex<double> is layout-compatible with double[2] (re, im).
    std::copy(payload.begin(), payload.end(),
              reinterpret_cast<double*>(out.matrix.v.data()));
  }
  return out;
}

}  // namespace psolv
