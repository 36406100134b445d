#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "psolv/common.hpp"

namespace psolv {

// Pointwise matrix symbol w -> N x N complex matrix; w is a real parameter
// point of any dimension (a phase-space point, a conic slice coordinate, ...).
using MatrixFn = std::function<Eigen::MatrixXcd(const Eigen::VectorXd&)>;
using ScalarSymbolFn = std::function<cplx(const Eigen::VectorXd&)>;

// (algebraic, geometric) multiplicity of lambda as an eigenvalue of one
// matrix: alg = eigenvalues within cluster_radius of lambda, geo = N - rank
// of P - lambda Id with singular values below rank_tol * sigma_max dropped.
// ambiguous is set when another eigenvalue sits in (radius, 2 radius]: the
// cluster is not separated and the caller should widen or shrink the radius.
struct MultPair {
  int alg = 0;
  int geo = 0;
  bool ambiguous = false;
  double cluster_gap = 0.0;  // nearest excluded eigenvalue distance / radius
};
MultPair multiplicities(const Eigen::MatrixXcd& p, cplx lambda,
                        double cluster_radius, double rank_tol = 1e-8);

// Principal type at w0: d_nu P(w0) : ker P(w0) -> coker P(w0) bijective for
// some direction nu.  Checked two ways and cross-checked per direction:
//   det route    |d^k_nu det P(w0)| > threshold, k = dim ker P(w0),
//                central differences with one Richardson step (k <= 4);
//   bilinear route  smallest singular value of the k x k form
//                   (u, v) -> <d_nu P(w0) u, v> on ker P x ker P*.
struct PrincipalTypeReport {
  bool is_pt = false;
  bool elliptic = false;       // det P(w0) away from 0: trivially principal type
  bool indeterminate = false;  // routes disagree, or k > 4
  int k = 0;                   // dim ker P(w0)
  Eigen::VectorXd witness;     // best direction nu
  double det_derivative = 0.0;   // |d^k_nu det| at the witness
  double bilinear_min_sv = 0.0;  // sigma_min of the form at the witness
  double det_threshold = 0.0;    // decision threshold actually used
  double rank_tol = 0.0;
  std::string note;
};
PrincipalTypeReport principal_type_test(const MatrixFn& p,
                                        const Eigen::VectorXd& w0,
                                        double fd_step = 1e-2,
                                        double tol = 1e-6);

// Constant characteristics near w0 (eigenvalue sections with |lambda| <
// lambda_window keep their algebraic and geometric multiplicity): eigenvalues
// of P(w0) are clustered into sections, n_samples points are drawn uniformly
// from the eps_ball, and each sample's eigenvalue clusters are assigned to the
// nearest section.  A tracked section fails if it splits, merges, or changes
// (alg, geo); near-equidistant assignments flag the verdict indeterminate.
struct SectionRecord {
  cplx lambda0;
  int alg = 0;
  int geo = 0;
  bool in_window = false;
};
struct CharacteristicsReport {
  bool constant = true;
  bool indeterminate = false;
  std::vector<SectionRecord> sections;
  // first offending sample, if any
  Eigen::VectorXd offending_w;
  cplx offending_lambda;
  int off_alg = 0, off_geo = 0;
  int off_section = -1;
  std::string note;
};
CharacteristicsReport constant_characteristics_test(
    const MatrixFn& p, const Eigen::VectorXd& w0, double eps_ball,
    int n_samples, double lambda_window, double tol = 1e-6,
    std::uint64_t seed = 0x5eed5a1f);

// Block reduction of a matrix path along one eigenvalue section lambda[i]
// with constant multiplicity alg = geo = K: per node, E = [kernel basis |
// complement] (SVD null space, Procrustes-aligned to the previous node), then
// the left shear [[Id, -P12 P22^{-1}], [0, Id]] applied to E^* P E zeroes the
// (1,2) block.  a[i] P[i] b[i] = q[i] holds to roundoff; res21 and q11_dev
// certify that q is block-diagonal with q11 = lambda Id_K.
struct BlockReduction {
  bool ok = true;
  std::size_t dim_k = 0;
  std::vector<Eigen::MatrixXcd> e;  // unitary frames
  std::vector<Eigen::MatrixXcd> a;  // left factors (shear * E^*)
  std::vector<Eigen::MatrixXcd> q;
  std::vector<double> res12, res21, q11_dev;
  std::string note;
};
BlockReduction block_reduce(const std::vector<Eigen::MatrixXcd>& path,
                            const std::vector<cplx>& lambda,
                            double tol = 1e-8);

// N x N companion system
//   [[Q, -1, 0, ...], [0, Q, -1, ...], ..., [A0, A1, ..., Q + A_{N-1}]]
// for a scalar symbol Q and lower-order coefficients A0..A_{N-1}.
MatrixFn companion_system(const ScalarSymbolFn& q,
                          const std::vector<ScalarSymbolFn>& a_low);

// Named classifier runs over the worked examples, with the documented
// verdicts asserted by the caller: expected_pt / expected_cc hold the
// documented truth, matches is the comparison against the computed reports.
struct GalleryEntry {
  std::string name;
  Eigen::VectorXd w0;
  PrincipalTypeReport pt;
  CharacteristicsReport cc;
  bool expected_pt = false;
  int expected_cc = -1;  // -1 not asserted, 0 false, 1 true
  bool self_adjoint = false;
  bool diagonalizable = false;  // alg == geo for every zero-window section
  bool matches = false;
  std::string expected_note;
};
std::vector<GalleryEntry> gallery();

// JSON lines for reports and the gallery (used by the CLI).
std::string to_json(const PrincipalTypeReport& r);
std::string to_json(const CharacteristicsReport& r);
std::string to_json(const GalleryEntry& e);

}  // namespace psolv
