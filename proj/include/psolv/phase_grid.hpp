#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "psolv/common.hpp"

namespace psolv {

// Uniform cell-centered grid on the rectangle [x_min,x_max] x [xi_min,xi_max]:
// x_j = x_min + (j + 1/2) dx, xi_k = xi_min + (k + 1/2) dxi. h is the
// semiclassical parameter carried with the grid, 0 < h <= 1.
struct PhaseGrid {
  double x_min = -1.0, x_max = 1.0;
  std::size_t n_x = 0;
  double xi_min = -1.0, xi_max = 1.0;
  std::size_t n_xi = 0;
  double h = 1.0;

  double dx() const { return (x_max - x_min) / static_cast<double>(n_x); }
  double dxi() const { return (xi_max - xi_min) / static_cast<double>(n_xi); }
  double x(std::size_t j) const { return x_min + (static_cast<double>(j) + 0.5) * dx(); }
  double xi(std::size_t k) const { return xi_min + (static_cast<double>(k) + 0.5) * dxi(); }
  std::size_t nodes() const { return n_x * n_xi; }

  // Grid-adjacency slack for discrete Lipschitz checks.
  double eps_grid() const {
    const double lo = dx() < dxi() ? dx() : dxi();
    return 2.0 * (dx() + dxi()) / lo;
  }

  // Quantization compatibility: dx*dxi*n_xi should be 2*pi*(positive integer).
  // Returns the nearest integer multiple and deviation through the out-params.
  bool matched(double* multiple = nullptr, double* deviation = nullptr) const;

  // Square window with dx*dxi*n = 2*pi exactly: half-width sqrt(pi*n)/sqrt(2).
  static PhaseGrid matched_square(std::size_t n, double h);

  void validate() const;  // throws Error on empty axes or bad bounds/h
};

// Uniform time grid including both endpoints: t_i = t_min + i*dt,
// dt = (t_max - t_min)/(n_t - 1). n_t == 1 degenerates to the single time
// t_min. T > 0 is the multiplier horizon; when set, the window [-T, T] must
// sit inside [t_min, t_max].
struct TimeGrid {
  double t_min = 0.0, t_max = 0.0;
  std::size_t n_t = 1;
  double T = 0.0;

  double dt() const {
    return n_t > 1 ? (t_max - t_min) / static_cast<double>(n_t - 1) : 0.0;
  }
  double t(std::size_t i) const { return t_min + static_cast<double>(i) * dt(); }

  void validate() const;          // grid sanity only
  void validate_horizon() const;  // additionally t_min <= -T < T <= t_max

  static TimeGrid symmetric(double half_width, std::size_t n_t, double T);
};

// Real scalar symbol sampled on (t, x, xi); layout (n_t, n_x, n_xi) row-major.
struct ScalarField {
  PhaseGrid grid;
  TimeGrid time;
  std::vector<double> v;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * grid.n_x + j) * grid.n_xi + k;
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return v[index(i, j, k)]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return v[index(i, j, k)]; }
  double* slice(std::size_t i) { return v.data() + i * grid.nodes(); }
  const double* slice(std::size_t i) const { return v.data() + i * grid.nodes(); }

  static ScalarField zeros(const PhaseGrid& g, const TimeGrid& tg);
};

// Complex N x N matrix symbol; layout (n_t, n_x, n_xi, N, N) row-major.
struct MatrixField {
  PhaseGrid grid;
  TimeGrid time;
  std::size_t N = 1;
  std::vector<cplx> v;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k,
                    std::size_t r, std::size_t s) const {
    return (((i * grid.n_x + j) * grid.n_xi + k) * N + r) * N + s;
  }
  cplx& at(std::size_t i, std::size_t j, std::size_t k, std::size_t r, std::size_t s) {
    return v[index(i, j, k, r, s)];
  }
  cplx at(std::size_t i, std::size_t j, std::size_t k, std::size_t r, std::size_t s) const {
    return v[index(i, j, k, r, s)];
  }

  static MatrixField zeros(const PhaseGrid& g, const TimeGrid& tg, std::size_t N);
};

using ScalarSymbol = std::function<double(double t, double x, double xi)>;
// Writes the N x N row-major matrix value into out.
using MatrixSymbol = std::function<void(double t, double x, double xi, cplx* out)>;

// Samplers reject non-finite callback values with the offending (t, x, xi).
ScalarField sample_scalar(const ScalarSymbol& f, const PhaseGrid& g, const TimeGrid& tg);
MatrixField sample_matrix(const MatrixSymbol& a, std::size_t N, const PhaseGrid& g,
                          const TimeGrid& tg);

// Phase-space derivatives per time slice. Second-order stencils everywhere:
// central in the interior, one-sided at the boundary. order 1 fills the
// gradient blocks, order 2 additionally the Hessian blocks; grad_norm is the
// Euclidean norm of (f_x, f_xi) and hess_norm the Frobenius norm of the full
// 2x2 Hessian (mixed entry counted twice).
struct DiffW {
  int order = 1;
  ScalarField fx, fxi, grad_norm;
  ScalarField fxx, fxixi, fxxi, hess_norm;
};
DiffW diff_w(const ScalarField& f, int order);

// PSLF field container: magic "PSLFIELD"; little-endian header
// u32 version=1, u32 kind (0 scalar, 1 matrix, 2 operator), u32 n_t, n_x,
// n_xi, N, f64 x_min, x_max, xi_min, xi_max, t_min, t_max, h, T; row-major
// f64 payload, re/im interleaved for complex kinds.
inline constexpr std::uint32_t kPslfScalar = 0;
inline constexpr std::uint32_t kPslfMatrix = 1;
inline constexpr std::uint32_t kPslfOperator = 2;

// Raw record header; kind == 2 (operator) stores a dense (n_x*N)^2 complex
// matrix with n_xi == n_x and reuses the window/h metadata of the source grid.
struct PslfHeader {
  std::uint32_t version = 1, kind = kPslfScalar, n_t = 1, n_x = 0, n_xi = 0, N = 1;
  double x_min = 0, x_max = 0, xi_min = 0, xi_max = 0;
  double t_min = 0, t_max = 0, h = 1, T = 0;
};

// Low-level record I/O shared by every kind. pslf_read returns the full
// payload (finite-checked) and rejects trailing bytes; callers interpret it.
void pslf_write(const std::string& path, const PslfHeader& h, const double* payload,
                std::size_t n);
std::vector<double> pslf_read(const std::string& path, PslfHeader& h);

void write_field(const std::string& path, const ScalarField& f);
void write_field(const std::string& path, const MatrixField& f);

struct AnyField {
  std::uint32_t kind = kPslfScalar;
  ScalarField scalar;  // kind == 0
  MatrixField matrix;  // kind == 1
};
AnyField read_field(const std::string& path);

}  // namespace psolv
