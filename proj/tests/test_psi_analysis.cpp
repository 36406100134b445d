#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "psolv/psi_analysis.hpp"

using namespace psolv;

namespace {

PhaseGrid grid(double xlo, double xhi, std::size_t nx, double xilo, double xihi,
               std::size_t nxi, double h = 1.0) {
  PhaseGrid g;
  g.x_min = xlo;
  g.x_max = xhi;
  g.n_x = nx;
  g.xi_min = xilo;
  g.xi_max = xihi;
  g.n_xi = nxi;
  g.h = h;
  return g;
}

// Independent signed-distance reimplementation: direct scalar double loop over
// the zero set (label-0 nodes plus midpoints of axis-adjacent +/- pairs, the
// crossings the node set misses), no kernel layer involved. Used as the
// correctness oracle.
ScalarField naive_delta0(const SignPartition& p) {
  const PhaseGrid& g = p.grid;
  ScalarField out = ScalarField::zeros(g, p.time);
  const double cap = 1.0 / std::sqrt(g.h);
  for (std::size_t i = 0; i < p.time.n_t; ++i) {
    std::vector<std::pair<double, double>> zero;
    for (std::size_t j = 0; j < g.n_x; ++j)
      for (std::size_t k = 0; k < g.n_xi; ++k) {
        if (p.at(i, j, k) == 0) zero.emplace_back(g.x(j), g.xi(k));
        if (j + 1 < g.n_x && p.at(i, j, k) * p.at(i, j + 1, k) < 0)
          zero.emplace_back(0.5 * (g.x(j) + g.x(j + 1)), g.xi(k));
        if (k + 1 < g.n_xi && p.at(i, j, k) * p.at(i, j, k + 1) < 0)
          zero.emplace_back(g.x(j), 0.5 * (g.xi(k) + g.xi(k + 1)));
      }
    for (std::size_t j = 0; j < g.n_x; ++j)
      for (std::size_t k = 0; k < g.n_xi; ++k) {
        const signed char lab = p.at(i, j, k);
        if (lab == 0) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [zx, zxi] : zero)
          best = std::min(best, std::hypot(g.x(j) - zx, g.xi(k) - zxi));
        out.at(i, j, k) = lab * std::min(best, cap);
      }
  }
  return out;
}

}  // namespace

TEST_CASE("sign_partition on the zero symbol") {
  const PhaseGrid g = grid(-1, 1, 4, -1, 1, 4);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 5, 0.0);
  const ScalarField f =
      sample_scalar([](double, double, double) { return 0.0; }, g, tg);
  const SignPartition p = sign_partition(f);
  CHECK(p.violations.empty());
  for (signed char l : p.label) CHECK(l == 0);
}

TEST_CASE("sign_partition of t*xi on a positive-frequency window") {
  const PhaseGrid g = grid(-1, 1, 3, 0.5, 1.5, 4);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 5, 0.0);  // t = -1,-0.5,0,0.5,1
  const ScalarField f =
      sample_scalar([](double t, double, double xi) { return t * xi; }, g, tg);
  const SignPartition p = sign_partition(f);
  CHECK(p.violations.empty());
  for (std::size_t j = 0; j < g.n_x; ++j)
    for (std::size_t k = 0; k < g.n_xi; ++k) {
      CHECK(p.at(0, j, k) == -1);
      CHECK(p.at(1, j, k) == -1);
      CHECK(p.at(2, j, k) == 0);  // f == 0 on the t = 0 slice
      CHECK(p.at(3, j, k) == +1);
      CHECK(p.at(4, j, k) == +1);
    }
}

TEST_CASE("sign_partition reports violations on a sign flip from + to -") {
  // t*xi with xi < 0: positive early, negative late at every node.
  const PhaseGrid g = grid(-1, 1, 3, -1.5, -0.5, 4);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 5, 0.0);
  const ScalarField f =
      sample_scalar([](double t, double, double xi) { return t * xi; }, g, tg);
  const SignPartition p = sign_partition(f);
  CHECK_FALSE(p.violations.empty());
  const SignViolation& v = p.violations.front();
  CHECK(v.s_plus < v.s_minus);           // + witness precedes - witness
  CHECK(v.s_plus == doctest::Approx(-1.0));
  CHECK(v.s_minus == doctest::Approx(1.0));
  // Conflicted nodes keep +1 (documented policy).
  CHECK(p.at(v.i, v.j, v.k) == +1);
}

TEST_CASE("check_psibar accepts monotone signs and rejects minus-t") {
  const PhaseGrid g = grid(-1, 1, 3, -1, 1, 3);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 3, 0.0);

  CHECK(check_psibar(sample_scalar(
            [](double t, double, double) { return t; }, g, tg)).holds);
  CHECK(check_psibar(sample_scalar(
            [](double, double x, double) { return x; }, g, tg)).holds);

  const PsibarReport bad = check_psibar(sample_scalar(
      [](double t, double, double) { return -t; }, g, tg));
  CHECK_FALSE(bad.holds);
  REQUIRE_FALSE(bad.violations.empty());
  CHECK(bad.violations.front().t == doctest::Approx(-1.0));
  CHECK(bad.violations.front().witness == doctest::Approx(1.0));
}

TEST_CASE("signed_distance of coordinate function on a symmetric grid") {
  // n_x = 5 over [-1,1]: centers -0.8, -0.4, 0, 0.4, 0.8; zero column at x=0.
  const PhaseGrid g = grid(-1, 1, 5, -1, 1, 3, 1.0);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 3, 0.0);
  const ScalarField f =
      sample_scalar([](double, double x, double) { return x; }, g, tg);
  const SignPartition p = sign_partition(f);
  const SignedDistanceField sd = signed_distance(p);
  CHECK(sd.cap == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(sd.delta0.at(i, 0, k) == doctest::Approx(-0.8));
      CHECK(sd.delta0.at(i, 1, k) == doctest::Approx(-0.4));
      CHECK(sd.delta0.at(i, 2, k) == doctest::Approx(0.0));
      CHECK(sd.delta0.at(i, 3, k) == doctest::Approx(0.4));
      CHECK(sd.delta0.at(i, 4, k) == doctest::Approx(0.8));
    }
}

TEST_CASE("signed_distance sees the crossing between nodes on an even grid") {
  // n_x = 4 over [-1,1]: centers -0.75, -0.25, 0.25, 0.75; no node sits on
  // the sign change of x, so X_0 is the midpoint column at x = 0.
  const PhaseGrid g = grid(-1, 1, 4, -1, 1, 3, 1.0);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 3, 0.0);
  const ScalarField f =
      sample_scalar([](double, double x, double) { return x; }, g, tg);
  const SignPartition p = sign_partition(f);
  const SignedDistanceField sd = signed_distance(p);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sd.slice_zero_empty[i] == 0);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(sd.delta0.at(i, 0, k) == doctest::Approx(-0.75));
      CHECK(sd.delta0.at(i, 1, k) == doctest::Approx(-0.25));
      CHECK(sd.delta0.at(i, 2, k) == doctest::Approx(0.25));
      CHECK(sd.delta0.at(i, 3, k) == doctest::Approx(0.75));
    }
  }
}

TEST_CASE("signed_distance caps at h^{-1/2} and handles empty zero sets") {
  const PhaseGrid g = grid(-1, 1, 4, -1, 1, 4, 0.25);  // cap = 2
  const TimeGrid tg = TimeGrid::symmetric(1.0, 2, 0.0);
  const ScalarField f =
      sample_scalar([](double, double x, double) { return 2.0 + x; }, g, tg);
  const SignPartition p = sign_partition(f);
  const SignedDistanceField sd = signed_distance(p);
  CHECK(sd.cap == doctest::Approx(2.0));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(sd.slice_zero_empty[i] == 1);
    for (std::size_t m = 0; m < g.nodes(); ++m) {
      CHECK(sd.delta0.slice(i)[m] == doctest::Approx(2.0));
      CHECK(std::isinf(sd.d0.slice(i)[m]));
    }
  }
}

TEST_CASE("signed_distance matches the naive oracle on structured fields") {
  const TimeGrid tg = TimeGrid::symmetric(1.0, 7, 0.0);
  const PhaseGrid g = grid(-1.5, 1.5, 9, -2, 2, 11, 0.5);

  std::vector<ScalarSymbol> symbols = {
      [](double t, double, double xi) { return t * (1.0 + std::tanh(xi)); },
      [](double t, double x, double xi) {
        return std::tanh(2.0 * t) * std::exp(-x * x - xi * xi);
      },
      [](double, double x, double xi) {
        return (x - 0.1666666666666667) * (1.0 + 0.3 * std::sin(x + 2.0 * xi));
      },
  };
  for (const auto& sym : symbols) {
    const ScalarField f = sample_scalar(sym, g, tg);
    const SignPartition p = sign_partition(f);
    const SignedDistanceField sd = signed_distance(p);
    const ScalarField oracle = naive_delta0(p);
    for (std::size_t idx = 0; idx < sd.delta0.v.size(); ++idx)
      CHECK(sd.delta0.v[idx] == doctest::Approx(oracle.v[idx]).epsilon(1e-13));
  }
}

TEST_CASE("delta0 invariants on condition-compliant corpus fields") {
  const TimeGrid tg = TimeGrid::symmetric(1.0, 9, 0.0);
  const PhaseGrid g = grid(-1.5, 1.5, 11, -1.5, 1.5, 11, 0.5);

  std::vector<ScalarSymbol> symbols = {
      [](double t, double, double xi) { return t * (1.0 + std::tanh(xi)); },
      [](double t, double x, double xi) {
        return std::tanh(2.0 * t) * std::exp(-(x * x + xi * xi));
      },
      [](double, double x, double) { return x; },
  };

  for (const auto& sym : symbols) {
    const ScalarField f = sample_scalar(sym, g, tg);
    const SignPartition p = sign_partition(f);
    REQUIRE(p.violations.empty());
    const SignedDistanceField sd = signed_distance(p);
    const double tau = p.tau_zero;

    // |delta0| <= cap and sign consistency delta0*f >= -tau*(1+|delta0|).
    for (std::size_t idx = 0; idx < f.v.size(); ++idx) {
      CHECK(std::abs(sd.delta0.v[idx]) <= sd.cap + 1e-12);
      CHECK(sd.delta0.v[idx] * f.v[idx] >=
            -tau * (1.0 + std::abs(sd.delta0.v[idx])) - 1e-15);
    }

    // Exact monotonicity in t at every node.
    const std::size_t nodes = g.nodes();
    for (std::size_t m = 0; m < nodes; ++m)
      for (std::size_t i = 0; i + 1 < tg.n_t; ++i)
        CHECK(sd.delta0.slice(i)[m] <= sd.delta0.slice(i + 1)[m] + 1e-14);

    // Discrete Lipschitz bound over adjacent node pairs.
    const double bound = 1.0 + g.eps_grid();
    for (std::size_t i = 0; i < tg.n_t; ++i) {
      const double* d = sd.delta0.slice(i);
      for (std::size_t j = 0; j < g.n_x; ++j)
        for (std::size_t k = 0; k < g.n_xi; ++k) {
          const double v0 = d[j * g.n_xi + k];
          if (j + 1 < g.n_x)
            CHECK(std::abs(v0 - d[(j + 1) * g.n_xi + k]) / g.dx() <=
                  bound + 1e-12);
          if (k + 1 < g.n_xi)
            CHECK(std::abs(v0 - d[j * g.n_xi + k + 1]) / g.dxi() <=
                  bound + 1e-12);
        }
    }

    // Up-set / down-set structure of the labels.
    for (std::size_t m = 0; m < nodes; ++m)
      for (std::size_t i = 0; i + 1 < tg.n_t; ++i) {
        const signed char a = p.label[i * nodes + m];
        const signed char b = p.label[(i + 1) * nodes + m];
        if (a == +1) CHECK(b == +1);  // X_+ is an up-set
        if (b == -1) CHECK(a == -1);  // X_- is a down-set
      }
  }
}

TEST_CASE("trace follows straight bicharacteristics of xi and flags crossings") {
  TraceOptions opt;
  opt.step = 1e-2;
  opt.max_steps = 400;
  opt.x_lo = -5;
  opt.x_hi = 5;
  opt.xi_lo = -5;
  opt.xi_hi = 5;

  // q = xi + i x: flow x(t) = x0 + t, xi = 0; Im q = x crosses - to +.
  const TraceResult r = trace_bicharacteristic(
      [](double x, double xi) { return cplx(xi, x); }, -1.0, 0.0, opt);
  CHECK(r.status == TraceStatus::Completed);
  REQUIRE(r.path.size() == 401);
  for (std::size_t s = 0; s < r.path.size(); ++s) {
    CHECK(r.path[s].x ==
          doctest::Approx(-1.0 + 1e-2 * static_cast<double>(s)).epsilon(1e-10));
    CHECK(r.path[s].xi == doctest::Approx(0.0));
  }
  CHECK(r.max_re_drift <= 1e-12);
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].im_before < 0.0);
  CHECK(r.events[0].im_after > 0.0);
  CHECK(std::abs(r.events[0].x) <= 2e-2);  // crossing localized near x = 0

  // q = xi - i x: Im q goes + to -, allowed; no events.
  const TraceResult r2 = trace_bicharacteristic(
      [](double x, double xi) { return cplx(xi, -x); }, -1.0, 0.0, opt);
  CHECK(r2.events.empty());
}

TEST_CASE("trace conserves Re q along curved flows") {
  TraceOptions opt;
  opt.step = 1e-2;
  opt.max_steps = 100;
  // Re q = x*xi: Hamilton flow x' = x, xi' = -xi from (1, 0): x(t) = e^t.
  const TraceResult r = trace_bicharacteristic(
      [](double x, double xi) { return cplx(x * xi, 0.0); }, 1.0, 0.0, opt);
  CHECK(r.status == TraceStatus::Completed);
  CHECK(r.path.back().x == doctest::Approx(std::exp(1.0)).epsilon(1e-7));
  CHECK(r.max_re_drift <= 1e-8);
}

TEST_CASE("trace error and exit paths") {
  TraceOptions opt;
  opt.step = 1e-2;
  opt.max_steps = 1000;
  opt.x_hi = 1.5;  // narrow window: the xi-flow exits quickly

  CHECK_THROWS_WITH_AS(trace_bicharacteristic(
                           [](double, double xi) { return cplx(xi + 1.0, 0.0); },
                           0.0, 0.0, opt),
                       doctest::Contains("not characteristic"), Error);
  CHECK_THROWS_WITH_AS(trace_bicharacteristic(
                           [](double, double xi) { return cplx(xi * xi, 0.0); },
                           0.0, 0.0, opt),
                       doctest::Contains("degenerate"), Error);

  const TraceResult r = trace_bicharacteristic(
      [](double, double xi) { return cplx(xi, 0.0); }, 1.0, 0.0, opt);
  CHECK(r.status == TraceStatus::Exited);
}
