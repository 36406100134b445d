#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "psolv/estimate_lab.hpp"
#include "psolv/psi_analysis.hpp"
#include "psolv/weights.hpp"

using namespace psolv;
using cd = std::complex<double>;

namespace {

const cd I(0.0, 1.0);

// Separable Gaussian trial phi(t) * psi(x) on the space-time grid.
Trial gaussian_trial(const PhaseGrid& g, const TimeGrid& tg, double a_t,
                     std::size_t N = 1, std::size_t component = 0) {
  Trial tr;
  tr.label = "gaussian";
  tr.values.resize(tg.n_t);
  for (std::size_t i = 0; i < tg.n_t; ++i) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(N * g.n_x);
    const double phi = std::exp(-a_t * tg.t(i) * tg.t(i));
    for (std::size_t j = 0; j < g.n_x; ++j)
      v[component * g.n_x + j] = phi * std::exp(-0.5 * g.x(j) * g.x(j));
    tr.values[i] = v;
  }
  return tr;
}

ScalarField constant_field(const PhaseGrid& g, const TimeGrid& tg, double c) {
  ScalarField f = ScalarField::zeros(g, tg);
  for (auto& v : f.v) v = c;
  return f;
}

// Pseudo-sign and multiplier for a scalar symbol, the same chain the
// pipeline uses, exposed so single stages can be probed.
struct Chain {
  SignPartition part;
  SignedDistanceField sd;
  WeightBundle wb;
  PseudoSign ps;
  std::vector<OperatorMatrix> mult;
};

Chain build_chain(const ScalarField& f, double T) {
  Chain c;
  c.part = sign_partition(f);
  c.sd = signed_distance(c.part);
  c.wb = build_weights(f, c.sd);
  c.ps = build_rho(c.sd.delta0, c.wb.m, T);
  c.mult = build_multiplier(c.ps, f.grid);
  return c;
}

double max_abs(const Eigen::VectorXcd& v) { return v.lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST_CASE("assemble_P0 with f = 0 is the discrete time derivative") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 0.1);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 25, 1.0);
  const ScalarField f = ScalarField::zeros(g, tg);
  const SpaceTimeOperator p0 = assemble_P0(f);
  CHECK(p0.N == 1);
  CHECK(p0.f_blocks.size() == tg.n_t);
  CHECK_FALSE(p0.has_f0);

  const Trial u = gaussian_trial(g, tg, 4.0);
  const std::vector<Eigen::VectorXcd> pu = apply_P0(p0, u);
  const std::vector<Eigen::VectorXcd> du = time_derivative(u.values, tg.dt());

  // The quantization of the zero symbol is the zero matrix, so P0 u must
  // coincide with -i d_t u down to the last bit.
  double mech = 0.0;
  for (std::size_t i = 0; i < tg.n_t; ++i)
    mech = std::max(mech, max_abs(pu[i] - (-I) * du[i]));
  CHECK(mech <= 1e-15);

  // Stencil accuracy against the analytic derivative of the Gaussian window.
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < tg.n_t; ++i) {
    const double t = tg.t(i);
    const double dphi = -8.0 * t * std::exp(-4.0 * t * t);
    Eigen::VectorXcd exact(g.n_x);
    for (std::size_t j = 0; j < g.n_x; ++j)
      exact[j] = dphi * std::exp(-0.5 * g.x(j) * g.x(j));
    err = std::max(err, max_abs(du[i] - exact));
    scale = std::max(scale, max_abs(exact));
  }
  CHECK(err <= 1e-2 * scale);
}

TEST_CASE("constant symbols act as exact multiplication inside P0") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 0.1);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 25, 1.0);
  const ScalarField f = constant_field(g, tg, 0.7);
  const SpaceTimeOperator p0 = assemble_P0(f);

  const Trial u = gaussian_trial(g, tg, 4.0);
  const std::vector<Eigen::VectorXcd> pu = apply_P0(p0, u);
  const std::vector<Eigen::VectorXcd> du = time_derivative(u.values, tg.dt());

  // On a matched grid weyl(0.7) = 0.7 Id, so P0 u - (-i d_t u) = 0.7 i u.
  double err = 0.0;
  for (std::size_t i = 0; i < tg.n_t; ++i)
    err = std::max(err,
                   max_abs(pu[i] - (-I) * du[i] - 0.7 * I * u.values[i]));
  CHECK(err <= 1e-12);
}

TEST_CASE("constant off-diagonal F0 swaps system components") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 0.1);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 25, 1.0);
  const ScalarField f = ScalarField::zeros(g, tg);
  const MatrixField f0 = sample_matrix(
      [](double, double, double, cplx* out) {
        out[0] = 0.0;
        out[1] = 1.0;
        out[2] = 1.0;
        out[3] = 0.0;
      },
      2, g, tg);
  const SpaceTimeOperator p0 = assemble_P0(f, f0);
  CHECK(p0.N == 2);
  CHECK(p0.has_f0);
  CHECK(p0.dim() == 2 * g.n_x);

  const Trial u = gaussian_trial(g, tg, 4.0, 2, 0);  // mass in component 0
  const std::vector<Eigen::VectorXcd> pu = apply_P0(p0, u);
  const std::vector<Eigen::VectorXcd> du = time_derivative(u.values, tg.dt());

  double err0 = 0.0, err1 = 0.0;
  for (std::size_t i = 0; i < tg.n_t; ++i) {
    // Component 0: pure time derivative; component 1: the swapped copy,
    // exact because weyl(1) = Id on a matched grid.
    err0 = std::max(err0, (pu[i].head(g.n_x) + I * du[i].head(g.n_x)).norm());
    err1 = std::max(
        err1, (pu[i].tail(g.n_x) - u.values[i].head(g.n_x)).norm());
  }
  CHECK(err0 <= 1e-12);
  CHECK(err1 <= 1e-12);
}

TEST_CASE("build_multiplier: zero field, constant field, spatial decay") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 0.1);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 9, 1.0);

  PseudoSign ps;
  ps.T = 1.0;
  ps.rho = ScalarField::zeros(g, tg);
  ps.B = ScalarField::zeros(g, tg);
  const std::vector<OperatorMatrix> zero_ops = build_multiplier(ps, g);
  REQUIRE(zero_ops.size() == tg.n_t);
  for (const OperatorMatrix& op : zero_ops)
    CHECK(op.m.cwiseAbs().maxCoeff() == 0.0);

  // B == 1 quantizes to (almost) the identity; the deficit lives near the
  // window edge, so probe with packets kept well inside.
  ps.B = constant_field(g, tg, 1.0);
  const std::vector<OperatorMatrix> one_ops = build_multiplier(ps, g);
  const std::vector<Eigen::VectorXcd> battery = interior_packets(g, 10.0);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(g.n_x, g.n_x);
  CHECK(battery_gap(one_ops[0].m, id, battery) <= 1e-6);

  // A sign-split symbol (f = x) gives a multiplier whose matrix decays away
  // from the diagonal: interior entries with |x_j - x_k| > 6 are noise
  // relative to the diagonal.
  const ScalarField fx = sample_scalar(
      [](double, double x, double) { return x; }, g, tg);
  const Chain c = build_chain(fx, 1.0);
  const Eigen::MatrixXcd& mid = c.mult[tg.n_t / 2].m;
  CHECK(hermiticity_defect(c.mult[tg.n_t / 2]) <= 1e-10);
  double maxdiag = 0.0;
  for (std::size_t j = 0; j < g.n_x; ++j)
    maxdiag = std::max(maxdiag, std::abs(mid(j, j)));
  CHECK(maxdiag > 0.0);
  const double w_edge = g.x_max - 3.0;
  double off = 0.0;
  for (std::size_t j = 0; j < g.n_x; ++j)
    for (std::size_t k = 0; k < g.n_x; ++k) {
      if (std::abs(g.x(j)) > w_edge || std::abs(g.x(k)) > w_edge) continue;
      if (std::abs(g.x(j) - g.x(k)) <= 6.0) continue;
      off = std::max(off, std::abs(mid(j, k)));
    }
  CHECK(off <= 1e-3 * maxdiag);
}

TEST_CASE("verify_propest: f = 0 is positive, error paths throw") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 0.1);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 25, 1.0);
  const ScalarField f = ScalarField::zeros(g, tg);
  const SpaceTimeOperator p0 = assemble_P0(f);
  const Chain c = build_chain(f, 1.0);
  const std::vector<Trial> trials = trial_corpus(g, tg, 5, 11);

  const EstimateReport rep = verify_propest(p0, c.mult, trials, 1.0, g.h);
  CHECK(rep.verdict);
  CHECK(rep.n_negative == 0);
  CHECK(rep.trial_labels.size() == trials.size());
  for (double r : rep.rhs_values) CHECK(r > 0.0);
  CHECK(std::isfinite(rep.fitted_C0));
  CHECK(rep.fitted_C0 > 0.0);
  CHECK(rep.fitted_budget == doctest::Approx(rep.fitted_C0 * 1.0));
  CHECK(rep.cs_constant > 0.0);

  // Degenerate trial: zero everywhere.
  Trial dead;
  dead.label = "dead";
  dead.values.assign(tg.n_t, Eigen::VectorXcd::Zero(g.n_x));
  CHECK_THROWS_AS(verify_propest(p0, c.mult, {dead}, 1.0, g.h), Error);

  // Slice-count mismatch.
  Trial torn = trials[0];
  torn.values.pop_back();
  CHECK_THROWS_AS(verify_propest(p0, c.mult, {torn}, 1.0, g.h), Error);

  // Horizon outside the grid.
  CHECK_THROWS_AS(verify_propest(p0, c.mult, trials, 1.3, g.h), Error);

  // Serialization round trips.
  const nlohmann::json j = nlohmann::json::parse(to_json(rep));
  CHECK(j["verdict"].get<bool>());
  CHECK(j["trials"].size() == trials.size());
  CHECK(j["fitted_C0"].get<double>() == doctest::Approx(rep.fitted_C0));

  const std::string path = "estimate_probe.csv";
  write_estimate_csv(path, rep);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "trial,lhs,rhs,ratio");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == trials.size());
  in.close();
  std::remove(path.c_str());
}

TEST_CASE("pipeline on a compliant symbol certifies the estimate") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 0.1);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 25, 1.0);
  const ScalarField f = sample_scalar(
      [](double t, double, double xi) { return t * (1.0 + std::tanh(xi)); },
      g, tg);

  PipelineOptions opt;
  opt.T_max = 1.0;
  opt.n_random_trials = 7;
  const PipelineResult res = run_estimate_pipeline(f, opt);

  CHECK(res.gate_passed);
  CHECK(res.gate.violations.empty());
  CHECK(res.certificate.all_hard_ok());
  CHECK(res.T_corpus > 0.0);
  CHECK(res.estimate.T == doctest::Approx(res.T_corpus));
  CHECK(res.estimate.verdict);
  CHECK(res.estimate.n_negative == 0);
  CHECK(res.estimate.fitted_C0 > 0.0);
  CHECK(res.west3.positive);
  CHECK(res.west3.c1 > 0.0);
  CHECK(res.dbest.ok);
  CHECK(res.dbest.min_margin >= -1e-5 * res.dbest.scale);
}

TEST_CASE("pipeline negative control: gate fails and trials go nonpositive") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 0.1);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 25, 1.0);
  const ScalarField f = sample_scalar(
      [](double t, double, double xi) { return -t * (1.0 + std::tanh(xi)); },
      g, tg);

  // Without skip_gate the pipeline refuses to run the estimate.
  const PipelineResult gated = run_estimate_pipeline(f, {});
  CHECK_FALSE(gated.gate_passed);
  CHECK_FALSE(gated.gate.violations.empty());
  CHECK(gated.estimate.trial_labels.empty());
  CHECK(gated.estimate.note.find("not attempted") != std::string::npos);

  PipelineOptions opt;
  opt.T_max = 1.0;
  opt.n_random_trials = 7;
  opt.skip_gate = true;
  const PipelineResult res = run_estimate_pipeline(f, opt);
  CHECK_FALSE(res.gate_passed);
  CHECK(res.T_corpus == 0.0);
  CHECK(res.estimate.T == doctest::Approx(1.0));
  CHECK(res.estimate.n_negative >= 1);
  CHECK_FALSE(res.estimate.verdict);
  CHECK(res.estimate.note.find("gate failed") != std::string::npos);
}

TEST_CASE("west3: value at the zero symbol, linearity, positivity guard") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 1.0);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 25, 1.0);
  const ScalarField f = ScalarField::zeros(g, tg);
  const Chain c = build_chain(f, 1.0);

  // f == 0 gives m == 1/2 and |B| <= 1/2, so at h = 1 the Rayleigh quotient
  // sits between 0.5/1.25 and 0.5.
  const West3Report rep = verify_west3(c.wb.m, c.ps, 1.0);
  CHECK(rep.positive);
  CHECK(rep.c1 >= 0.3);
  CHECK(rep.c1 <= 0.7);
  CHECK(rep.c1_per_slice.size() == tg.n_t);
  CHECK(rep.argmin_slice < tg.n_t);
  const nlohmann::json j = nlohmann::json::parse(to_json(rep));
  CHECK(j["positive"].get<bool>());

  // Scaling m by 10 scales the quotient by 10: the pair (W, K) is linear in
  // the weight.
  ScalarField m10 = c.wb.m;
  for (auto& v : m10.v) v *= 10.0;
  const West3Report rep10 = verify_west3(m10, c.ps, 1.0);
  CHECK(rep10.c1 == doctest::Approx(10.0 * rep.c1).epsilon(1e-9));

  // The full eigensolve agrees with the battery compression on sign.
  const West3Report full = verify_west3(c.wb.m, c.ps, 1.0, true);
  CHECK(full.positive);

  // A genuinely negative weight patch must be rejected, not averaged away.
  ScalarField bad = c.wb.m;
  for (std::size_t i = 0; i < tg.n_t; ++i)
    for (std::size_t j = 13; j < 19; ++j)
      for (std::size_t k = 13; k < 19; ++k) bad.at(i, j, k) = -5.0;
  CHECK_THROWS_AS(verify_west3(bad, c.ps, 1.0), Error);
}

TEST_CASE("reduce_lower_order: identity, exponential oracle, warnings") {
  const PhaseGrid g = PhaseGrid::matched_square(8, 1.0);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 9, 0.5);

  // F0 == 0 integrates to the identity with zero residual.
  const MatrixField zero2 = MatrixField::zeros(g, tg, 2);
  const ReductionReport r0 = reduce_lower_order(zero2);
  CHECK(r0.residual == 0.0);
  CHECK(r0.min_abs_det == doctest::Approx(1.0));
  CHECK(r0.invertible_ok);
  for (std::size_t i = 0; i < tg.n_t; ++i) {
    CHECK(std::abs(r0.E.at(i, 3, 4, 0, 0) - 1.0) == 0.0);
    CHECK(std::abs(r0.E.at(i, 3, 4, 0, 1)) == 0.0);
  }

  // Constant F0: E(t) = exp(-i t F0), checked against the matrix exponential.
  Eigen::Matrix2cd a;
  a << cd(0.3, 0.0), cd(0.2, -0.1), cd(0.2, 0.1), cd(-0.4, 0.0);
  const MatrixField f0 = sample_matrix(
      [&](double, double, double, cplx* out) {
        out[0] = a(0, 0);
        out[1] = a(0, 1);
        out[2] = a(1, 0);
        out[3] = a(1, 1);
      },
      2, g, tg);
  const ReductionReport rc = reduce_lower_order(f0);
  CHECK(rc.invertible_ok);
  double err = 0.0;
  for (std::size_t i = 0; i < tg.n_t; ++i) {
    const Eigen::Matrix2cd exact = (-I * tg.t(i) * a).exp();
    Eigen::Matrix2cd got;
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t s = 0; s < 2; ++s) got(r, s) = rc.E.at(i, 0, 0, r, s);
    err = std::max(err, (got - exact).norm());
  }
  CHECK(err <= 1e-10);
  CHECK(rc.residual <= 5e-5);  // one-sided stencil floor at this coarse dt

  // Time-dependent nilpotent driver: E_{01}(t) = -i sin(t).
  const TimeGrid tg33 = TimeGrid::symmetric(1.0, 33, 0.5);
  const MatrixField nil = sample_matrix(
      [](double t, double, double, cplx* out) {
        out[0] = 0.0;
        out[1] = std::cos(t);
        out[2] = 0.0;
        out[3] = 0.0;
      },
      2, g, tg33);
  const ReductionReport rn = reduce_lower_order(nil);
  double nerr = 0.0;
  for (std::size_t i = 0; i < tg33.n_t; ++i) {
    const cd exact = -I * std::sin(tg33.t(i));
    nerr = std::max(nerr, std::abs(rn.E.at(i, 2, 5, 0, 1) - exact));
    nerr = std::max(nerr, std::abs(rn.E.at(i, 2, 5, 0, 0) - 1.0));
  }
  CHECK(nerr <= 1e-6);

  // A strongly non-unitary driver collapses det E and must be flagged.
  const MatrixField grow = sample_matrix(
      [](double, double, double, cplx* out) { out[0] = cd(0.0, -25.0); }, 1,
      g, tg);
  const ReductionReport rg = reduce_lower_order(grow);
  CHECK_FALSE(rg.invertible_ok);
  CHECK(rg.min_abs_det < 1e-8);
  CHECK(rg.note.find("conjugation unreliable") != std::string::npos);
  const nlohmann::json j = nlohmann::json::parse(to_json(rg));
  CHECK_FALSE(j["invertible_ok"].get<bool>());

  // The integration is anchored at t = 0, so a grid without that node is
  // rejected.
  TimeGrid off;
  off.t_min = 0.05;
  off.t_max = 1.05;
  off.n_t = 9;
  off.T = 0.4;
  CHECK_THROWS_AS(reduce_lower_order(MatrixField::zeros(g, off, 2)), Error);
}

TEST_CASE("conjugated estimate stays positive for a dressed system") {
  const PhaseGrid g = PhaseGrid::matched_square(32, 0.1);
  const TimeGrid tg = TimeGrid::symmetric(1.25, 25, 1.0);
  const ScalarField f = sample_scalar(
      [](double t, double, double xi) { return t * (1.0 + std::tanh(xi)); },
      g, tg);
  const MatrixField f0 = sample_matrix(
      [](double, double, double, cplx* out) {
        out[0] = 0.0;
        out[1] = 0.3;
        out[2] = 0.3;
        out[3] = 0.0;
      },
      2, g, tg);

  const ReductionReport red = reduce_lower_order(f0);
  CHECK(red.invertible_ok);
  CHECK(red.residual <= 1e-4);
  const std::vector<OperatorMatrix> conj = quantize_conjugator(red.E);
  REQUIRE(conj.size() == tg.n_t);
  CHECK(conj[0].m.rows() == 2 * static_cast<long>(g.n_x));

  const SpaceTimeOperator p0 = assemble_P0(f, f0);
  const Chain c = build_chain(f, 0.5);
  const std::vector<Trial> trials = trial_corpus(g, tg, 4, 7, 2);

  const EstimateReport rep =
      verify_propest(p0, c.mult, trials, 0.5, g.h, conj);
  CHECK(rep.verdict);
  CHECK(rep.n_negative == 0);
  for (double r : rep.rhs_values) CHECK(r > 0.0);

  // Truncated conjugator stack is rejected.
  std::vector<OperatorMatrix> torn(conj.begin(), conj.end() - 1);
  CHECK_THROWS_AS(verify_propest(p0, c.mult, trials, 0.5, g.h, torn), Error);
}
