#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "psolv/weights.hpp"

using namespace psolv;

namespace {

PhaseGrid grid(double lo, double hi, std::size_t n, double h) {
  PhaseGrid g;
  g.x_min = lo;
  g.x_max = hi;
  g.n_x = n;
  g.xi_min = lo;
  g.xi_max = hi;
  g.n_xi = n;
  g.h = h;
  return g;
}

struct Pipeline {
  ScalarField f;
  SignPartition part;
  SignedDistanceField sd;
  WeightBundle wb;
};

Pipeline run_pipeline(const ScalarSymbol& sym, const PhaseGrid& g,
                      const TimeGrid& tg, double tau = -1.0) {
  Pipeline p;
  p.f = sample_scalar(sym, g, tg);
  p.part = sign_partition(p.f, tau);
  p.sd = signed_distance(p.part);
  p.wb = build_weights(p.f, p.sd);
  return p;
}

// Exhaustive pair enumeration: the oracle for build_m.
double brute_m(const std::vector<double>& d, const std::vector<double>& A,
               std::size_t i) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t1 = 0; t1 <= i; ++t1)
    for (std::size_t t2 = i; t2 < d.size(); ++t2)
      best = std::min(best, d[t2] - d[t1] + 0.5 * std::max(A[t1], A[t2]));
  return best;
}

}  // namespace

TEST_CASE("build_H trivial and hand values") {
  const TimeGrid tg = TimeGrid::symmetric(1.0, 3, 0.0);

  // f == 0: |f'| = |f''| = 0, delta0 = 0 -> H^{-1/2} = 1 everywhere.
  {
    const PhaseGrid g = grid(-1, 1, 5, 0.25);
    const Pipeline p = run_pipeline([](double, double, double) { return 0.0; },
                                    g, tg);
    for (double v : p.wb.hinv_sqrt.v) CHECK(v == doctest::Approx(1.0));
    for (double v : p.wb.M.v) CHECK(v == doctest::Approx(0.5));  // h^{1/2}
    for (double v : p.wb.m.v) CHECK(v == doctest::Approx(0.5));  // A/2 = 1/2
  }

  // f = x at h = 1 on the 5-point symmetric grid: at x = 0.8 the distance to
  // the zero column is 0.8, |f'| = 1, |f''| = 0, so
  // H^{-1/2} = 1 + 0.8 + 1/(0 + 1 + 1) = 2.3 (hand computation).
  {
    const PhaseGrid g = grid(-1, 1, 5, 1.0);
    const Pipeline p = run_pipeline([](double, double x, double) { return x; },
                                    g, tg);
    CHECK(p.sd.delta0.at(0, 4, 2) == doctest::Approx(0.8));
    CHECK(p.wb.hinv_sqrt.at(0, 4, 2) == doctest::Approx(2.3).epsilon(1e-9));
    // M = |f| + |f'| H^{-1/2} + 0 + h^{1/2} H^{-3/2}
    //   = 0.8 + 2.3 + 2.3^3 = 15.267 (hand computation).
    CHECK(p.wb.M.at(0, 4, 2) ==
          doctest::Approx(0.8 + 2.3 + 2.3 * 2.3 * 2.3).epsilon(1e-9));
  }

  // Constant positive symbol: empty zero set, delta0 = cap = h^{-1/2};
  // H^{-1/2} = 1 + cap exactly.
  {
    const PhaseGrid g = grid(-1, 1, 4, 0.25);
    const Pipeline p = run_pipeline([](double, double, double) { return 3.0; },
                                    g, tg);
    for (double v : p.wb.hinv_sqrt.v) CHECK(v == doctest::Approx(3.0));
    // M = 3 + 0 + 0 + 0.5 * 27.
    for (double v : p.wb.M.v) CHECK(v == doctest::Approx(3.0 + 13.5));
  }
}

TEST_CASE("build_m hand example and degenerate single slice") {
  // Hand case: delta0 = (-1, 0, 2), H^{-1/2} = 1 so A = <delta0>^2 = (4,1,9).
  // m(0): min(0+2, 1+2, 3+4.5) = 2; m(1): min(1+2, 0+.5, 7.5, 6.5) = 0.5;
  // m(2): min(7.5, 6.5, 4.5) = 4.5.
  PhaseGrid g = grid(-1, 1, 1, 0.0625);
  TimeGrid tg = TimeGrid::symmetric(1.0, 3, 0.0);
  ScalarField delta0 = ScalarField::zeros(g, tg);
  ScalarField hinv = ScalarField::zeros(g, tg);
  delta0.v = {-1.0, 0.0, 2.0};
  hinv.v = {1.0, 1.0, 1.0};
  const ScalarField m = build_m(delta0, hinv);
  CHECK(m.v[0] == doctest::Approx(2.0));
  CHECK(m.v[1] == doctest::Approx(0.5));
  CHECK(m.v[2] == doctest::Approx(4.5));

  TimeGrid tg1 = TimeGrid::symmetric(0.0, 1, 0.0);
  ScalarField d1 = ScalarField::zeros(g, tg1);
  ScalarField h1 = ScalarField::zeros(g, tg1);
  d1.v = {3.0};
  h1.v = {2.0};
  const ScalarField m1 = build_m(d1, h1);
  CHECK(m1.v[0] == doctest::Approx(0.5 * 16.0 / 2.0));  // A/2
}

TEST_CASE("build_m equals exhaustive pair enumeration on random monotone data") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> step(0.0, 0.5);
  std::uniform_real_distribution<double> hv(1.0, 4.0);

  const std::size_t nt = 17;
  PhaseGrid g = grid(-1, 1, 2, 0.01);  // cap = 10, plenty of headroom
  TimeGrid tg = TimeGrid::symmetric(1.0, nt, 0.0);

  for (int rep = 0; rep < 20; ++rep) {
    ScalarField delta0 = ScalarField::zeros(g, tg);
    ScalarField hinv = ScalarField::zeros(g, tg);
    const std::size_t nodes = g.nodes();
    for (std::size_t w = 0; w < nodes; ++w) {
      double cur = -2.0 + step(rng);
      for (std::size_t i = 0; i < nt; ++i) {
        delta0.v[i * nodes + w] = cur;
        hinv.v[i * nodes + w] = hv(rng);
        cur += step(rng);
      }
    }
    const ScalarField m = build_m(delta0, hinv);
    for (std::size_t w = 0; w < nodes; ++w) {
      std::vector<double> d(nt), A(nt);
      for (std::size_t i = 0; i < nt; ++i) {
        d[i] = delta0.v[i * nodes + w];
        const double br = 1.0 + std::abs(d[i]);
        A[i] = br * br / hinv.v[i * nodes + w];
      }
      for (std::size_t i = 0; i < nt; ++i)
        CHECK(m.v[i * nodes + w] ==
              doctest::Approx(brute_m(d, A, i)).epsilon(1e-13));
    }
  }
}

TEST_CASE("certificate on the zero symbol") {
  const PhaseGrid g = grid(-1, 1, 6, 0.25);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 5, 0.0);
  const Pipeline p = run_pipeline([](double, double, double) { return 0.0; },
                                  g, tg);
  const WeightCertificate c =
      certify_inequalities(p.f, p.part, p.sd, p.wb);
  CHECK(c.all_hard_ok());
  // M H^{3/2} <delta0>^2 / m = h^{1/2} * 1 * 1 / (1/2) = 2 sqrt(h) = 1.
  CHECK(c.mest0_C0 == doctest::Approx(2.0 * std::sqrt(0.25)).epsilon(1e-12));
  CHECK(c.fitted_C3 == doctest::Approx(std::sqrt(0.25) * 0.25).epsilon(1e-12));
  CHECK(c.norm_grad == doctest::Approx(0.0));
}

TEST_CASE("certificate hard inequalities hold on corpus symbols") {
  const TimeGrid tg = TimeGrid::symmetric(1.0, 9, 0.0);
  const PhaseGrid g = grid(-1.5, 1.5, 11, 0.25);

  std::vector<std::pair<ScalarSymbol, double>> corpus = {
      {[](double t, double, double xi) { return t * (1.0 + std::tanh(xi)); },
       -1.0},
      {[](double t, double x, double xi) {
         return std::tanh(2.0 * t) * std::exp(-(x * x + xi * xi));
       },
       -1.0},
      {[](double, double x, double) { return x; }, -1.0},
      // Curved zero set: resolve it as a one-cell band via tau_zero.
      {[](double, double x, double xi) { return x * x - std::exp(-xi * xi); },
       0.9},  // |f'| <= ~3, cell = 3/11 -> tau ~ 0.8; use 0.9 for margin
  };

  for (const auto& [sym, tau] : corpus) {
    const Pipeline p = run_pipeline(sym, g, tg, tau);
    REQUIRE(p.part.violations.empty());
    const WeightCertificate c =
        certify_inequalities(p.f, p.part, p.sd, p.wb);
    INFO("hhh_lower violation ", c.hhh_lower.max_violation);
    INFO("hhh_mid violation ", c.hhh_mid.max_violation);
    INFO("qmax violation ", c.qmax.max_violation);
    CHECK(c.all_hard_ok());
    CHECK(c.mest0_C0 > 0.0);
    CHECK(c.mest0_C0 <= 64.0);
    CHECK(c.slowvar_CH >= 1.0 - 1e-12);  // pair w = w0 gives exactly 1
  }
}

TEST_CASE("m is exactly A/2 when delta0 and A are constant in t") {
  // With delta0 constant in t and A constant, every pair gives
  // V = 0 + A/2, so m == A/2 and hhh_mid holds with equality.
  const PhaseGrid g = grid(-1, 1, 5, 1.0);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 7, 0.0);
  const Pipeline p = run_pipeline([](double, double x, double) { return x; },
                                  g, tg);
  for (std::size_t w = 0; w < g.nodes(); ++w) {
    const double hinv = p.wb.hinv_sqrt.v[w];
    const double br = 1.0 + std::abs(p.sd.delta0.v[w]);
    for (std::size_t i = 0; i < tg.n_t; ++i)
      CHECK(p.wb.m.v[i * g.nodes() + w] ==
            doctest::Approx(0.5 * br * br / hinv).epsilon(1e-13));
  }
}
