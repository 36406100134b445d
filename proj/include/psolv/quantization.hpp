#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "psolv/common.hpp"
#include "psolv/phase_grid.hpp"

namespace psolv {

// Dense operator on the discrete x-line acting on coefficient vectors
// u = (u(x_0), ..., u(x_{n_x-1})), system components stacked block-major
// (index = c*n_x + j). The natural inner product is <u,v> = dx sum conj(u) v;
// the dx factor cancels in every Rayleigh quotient so matrices act on plain
// vectors.
struct OperatorMatrix {
  std::size_t n_x = 0;
  std::size_t sys_dim = 1;
  Eigen::MatrixXcd m;
  std::string label;
  double tail_mass = 0.0;  // Wick path: symbol-weighted kernel mass lost off-grid

  std::size_t dim() const { return n_x * sys_dim; }
};

// Scalar symbol slice a(x, xi) at fixed t; complex values allowed.
using SliceFn = std::function<cplx(double, double)>;
// N x N matrix slice written row-major into out.
using MatrixSliceFn = std::function<void(double, double, cplx*)>;

// Weyl quantization
//   m[j,k] = dx * (dxi / 2pi) * sum_q a((x_j+x_k)/2, xi_q) exp(i (x_j-x_k) xi_q).
// On matched grids (dx*dxi*n_xi = 2pi, n_x <= n_xi) constants quantize to
// multiples of the identity and a = x to diag(x_j) exactly; real symbols give
// Hermitian matrices. The array form takes an n_x x n_xi row-major slice and
// fills midpoint values by linear interpolation in x (second order); prefer
// the callback form when the symbol is available analytically.
OperatorMatrix weyl_quantize(const SliceFn& a, const PhaseGrid& g,
                             const std::string& label = "weyl");
OperatorMatrix weyl_quantize(const std::vector<double>& slice, const PhaseGrid& g,
                             const std::string& label = "weyl");
// Blockwise quantization of an N x N symbol; block (r,s) is the Weyl matrix
// of entry a_{rs}.
OperatorMatrix weyl_quantize_system(const MatrixSliceFn& a, std::size_t N,
                                    const PhaseGrid& g,
                                    const std::string& label = "weyl-sys");

// Gaussian regularization a0(w) = pi^{-1} sum_z a(z) exp(-|w-z|^2) dz with the
// symbol zero-padded outside the window. tail_mass is the maximum over source
// nodes z of (|a(z)|/max|a|) times the kernel mass that the window clips at z;
// it vanishes for interior-concentrated symbols and flags boundary leakage.
struct RegularizedField {
  std::vector<double> v;  // same n_x x n_xi layout as the input
  double tail_mass = 0.0;
};
RegularizedField gaussian_regularize(const std::vector<double>& a, const PhaseGrid& g);

// Wick quantization = weyl_quantize(gaussian_regularize(a)); the regularized
// symbol is evaluated directly at the Weyl midpoints, so no interpolation
// enters. tail_mass above 1e-3 appends a warning to the label.
OperatorMatrix wick_quantize(const std::vector<double>& slice, const PhaseGrid& g,
                             const std::string& label = "wick");
OperatorMatrix wick_quantize(const SliceFn& a, const PhaseGrid& g,
                             const std::string& label = "wick");

// Coherent-state frame on the phase-space nodes,
//   phi_{(y,eta)}(x) = pi^{-1/4} exp(-(x-y)^2/2 + i eta (x-y)),
// quadrature weight dy*deta/(2pi). wick_via_frame assembles
// sum_z w_z a(z) |phi_z><phi_z| dx -- a sum of PSD rank-one terms and the
// independent cross-check of wick_quantize. Entry-wise it reduces to the
// kernel (dx dy deta / (2 pi^{3/2})) exp(-(mid-y)^2 - D^2/4 + i D eta) with
// mid = (x_j+x_k)/2, D = x_j-x_k.
struct CoherentFrame {
  PhaseGrid grid;

  Eigen::VectorXcd vector(double y, double eta) const;
  Eigen::MatrixXcd frame_operator() const;  // sum_z w_z dx phi_z phi_z^*
  // max |(F - I)[j,k]| over rows j with x_j at least margin from the edge
  double frame_deviation(double margin) const;
};
OperatorMatrix wick_via_frame(const std::vector<double>& slice, const PhaseGrid& g,
                              const std::string& label = "wick-frame");

// First Moyal correction residual R = a^w b^w - (ab)^w, measured as
// max ||R v|| / ||v|| over Gaussian wave packets centered on a sub-lattice
// with the given margin from the window edge. Raw spectral norms are polluted
// by the periodic wrap of the x window; interior packets see the calculus.
struct CompositionReport {
  double residual = 0.0;
  double predicted_scale = 0.0;  // caller-supplied m1*m2*h scale (0 = none)
  double ratio = 0.0;            // residual / predicted_scale
};
CompositionReport composition_residual(const SliceFn& a, const SliceFn& b,
                                       const PhaseGrid& g,
                                       double predicted_scale = 0.0,
                                       double margin = 5.0);

// Battery of normalized interior Gaussian packets used by the residual and
// identity checks: centers (y, eta) on a per_axis x per_axis lattice keeping
// the given margin from the window edge (the window center if the margin
// exhausts the window).
std::vector<Eigen::VectorXcd> interior_packets(const PhaseGrid& g, double margin,
                                               std::size_t per_axis = 5);

// Spectral norm of the compression of A - B onto the span of the battery:
// C(i,j) = u_i^* (A - B) u_j.  The discrete Weyl kernel is periodic across
// the x-window, so rows and columns at the window edge carry wrapped images
// of interior kernel mass; comparing operators through interior-supported
// vectors on both sides is the metric that reflects the continuum object.
double battery_gap(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                   const std::vector<Eigen::VectorXcd>& battery);

// Orthonormal basis (columns) for the span of the battery.  Neighboring
// Gaussian packets overlap strongly, so the raw Gram matrix is numerically
// singular; directions with Gram eigenvalue below cutoff * max are dropped
// before whitening (a generalized eigensolve against the raw Gram matrix is
// unstable for exactly this reason).  The default cutoff also keeps the
// whitened combinations genuinely interior-supported: amplifying a direction
// by 1/sqrt(gram eigenvalue) stretches packet tails toward the window edge,
// where they pick up the periodic-wrap ribbon of the kernel.
Eigen::MatrixXcd orthonormal_span(const std::vector<Eigen::VectorXcd>& battery,
                                  double cutoff = 1e-6);

// Smallest eigenvalue of Q^* H Q with Q = orthonormal_span(battery), H
// Hermitian: the Rayleigh-quotient minimum of H over the battery span.
double span_min_eigenvalue(const Eigen::MatrixXcd& herm,
                           const std::vector<Eigen::VectorXcd>& battery,
                           double cutoff = 1e-6);

// ||M - M^*||_max / max(1, ||M||_max).
double hermiticity_defect(const OperatorMatrix& op);
// Largest singular value (dense; dim <= 4096 by the module budget).
double spectral_norm(const Eigen::MatrixXcd& m);

// PSLF kind == 2 export of the dense entries (row-major, re/im interleaved),
// with the source grid in the header. CSV export is row-per-entry
// "j,k,re,im" for small matrices.
void write_operator(const std::string& path, const OperatorMatrix& op,
                    const PhaseGrid& g);
OperatorMatrix read_operator(const std::string& path, PhaseGrid* g = nullptr);
void write_operator_csv(const std::string& path, const OperatorMatrix& op);

}  // namespace psolv
