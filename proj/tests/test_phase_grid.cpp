#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "psolv/phase_grid.hpp"

using namespace psolv;

namespace {

PhaseGrid unit_grid(std::size_t nx, std::size_t nxi, double h = 1.0) {
  PhaseGrid g;
  g.x_min = -1.0;
  g.x_max = 1.0;
  g.n_x = nx;
  g.xi_min = -1.0;
  g.xi_max = 1.0;
  g.n_xi = nxi;
  g.h = h;
  return g;
}

}  // namespace

TEST_CASE("cell-centered coordinates") {
  const PhaseGrid g = unit_grid(3, 3);
  // dx = 2/3, centers at -2/3, 0, 2/3 (computed by hand).
  CHECK(g.x(0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK(g.x(1) == doctest::Approx(0.0));
  CHECK(g.x(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(g.xi(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("sample_scalar evaluates at cell centers and grid times") {
  const PhaseGrid g = unit_grid(3, 3);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 3, 0.0);
  CHECK(tg.t(0) == doctest::Approx(-1.0));
  CHECK(tg.t(1) == doctest::Approx(0.0));
  CHECK(tg.t(2) == doctest::Approx(1.0));

  const ScalarField fx =
      sample_scalar([](double, double x, double) { return x; }, g, tg);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(fx.at(i, 0, k) == doctest::Approx(-2.0 / 3.0));
      CHECK(fx.at(i, 1, k) == doctest::Approx(0.0));
      CHECK(fx.at(i, 2, k) == doctest::Approx(2.0 / 3.0));
    }

  const ScalarField ftxi =
      sample_scalar([](double t, double, double xi) { return t * xi; }, g, tg);
  CHECK(ftxi.at(0, 1, 0) == doctest::Approx(2.0 / 3.0));   // t=-1, xi=-2/3
  CHECK(ftxi.at(2, 1, 2) == doctest::Approx(2.0 / 3.0));   // t=+1, xi=+2/3
  CHECK(ftxi.at(1, 0, 0) == doctest::Approx(0.0));         // t=0
}

TEST_CASE("sample_scalar rejects non-finite values with location info") {
  const PhaseGrid g = unit_grid(3, 3);
  const TimeGrid tg = TimeGrid::symmetric(1.0, 1, 0.0);
  CHECK_THROWS_WITH_AS(
      sample_scalar([](double, double x, double) { return 1.0 / x; }, g, tg),
      doctest::Contains("non-finite"), Error);
}

TEST_CASE("diff_w is exact on quadratics including boundary stencils") {
  const PhaseGrid g = unit_grid(8, 7);
  const TimeGrid tg = TimeGrid::symmetric(0.0, 1, 0.0);

  // Affine: gradient exact, Hessian identically zero.
  const ScalarField aff = sample_scalar(
      [](double, double x, double xi) { return 2.0 * x - 3.0 * xi + 0.5; }, g, tg);
  const DiffW d1 = diff_w(aff, 2);
  for (std::size_t m = 0; m < g.nodes(); ++m) {
    CHECK(d1.fx.v[m] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(d1.fxi.v[m] == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(d1.grad_norm.v[m] == doctest::Approx(std::sqrt(13.0)).epsilon(1e-12));
    CHECK(d1.fxx.v[m] == doctest::Approx(0.0));
    CHECK(d1.fxixi.v[m] == doctest::Approx(0.0));
    CHECK(d1.fxxi.v[m] == doctest::Approx(0.0));
  }

  // Quadratic with mixed term: all second-order stencils exact.
  const ScalarField quad = sample_scalar(
      [](double, double x, double xi) { return x * x + 0.5 * xi * xi + x * xi; },
      g, tg);
  const DiffW d2 = diff_w(quad, 2);
  for (std::size_t j = 0; j < g.n_x; ++j)
    for (std::size_t k = 0; k < g.n_xi; ++k) {
      CHECK(d2.fx.at(0, j, k) ==
            doctest::Approx(2.0 * g.x(j) + g.xi(k)).epsilon(1e-11));
      CHECK(d2.fxx.at(0, j, k) == doctest::Approx(2.0).epsilon(1e-10));
      CHECK(d2.fxixi.at(0, j, k) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(d2.fxxi.at(0, j, k) == doctest::Approx(1.0).epsilon(1e-10));
      // Frobenius norm of [[2,1],[1,1]] = sqrt(4+1+1+1) = sqrt(7).
      CHECK(d2.hess_norm.at(0, j, k) ==
            doctest::Approx(std::sqrt(7.0)).epsilon(1e-10));
    }
}

TEST_CASE("diff_w gradient converges at second order on sin(x)") {
  const TimeGrid tg = TimeGrid::symmetric(0.0, 1, 0.0);
  auto max_err = [&](std::size_t n) {
    const PhaseGrid g = unit_grid(n, 3);
    const ScalarField f = sample_scalar(
        [](double, double x, double) { return std::sin(x); }, g, tg);
    const DiffW d = diff_w(f, 1);
    double e = 0.0;
    for (std::size_t j = 0; j < g.n_x; ++j)
      for (std::size_t k = 0; k < g.n_xi; ++k)
        e = std::max(e, std::abs(d.fx.at(0, j, k) - std::cos(g.x(j))));
    return e;
  };
  const double e16 = max_err(16);
  const double e32 = max_err(32);
  CHECK(e16 / e32 >= 3.5);  // second order: halving dx ~ quarters the error
}

TEST_CASE("PSLF round trip preserves metadata and payload") {
  PhaseGrid g = unit_grid(4, 5, 0.25);
  TimeGrid tg = TimeGrid::symmetric(1.0, 3, 0.5);
  const ScalarField f = sample_scalar(
      [](double t, double x, double xi) { return t + 2.0 * x - xi * xi; }, g, tg);
  const std::string path = "pslf_roundtrip_scalar.bin";
  write_field(path, f);
  const AnyField r = read_field(path);
  REQUIRE(r.kind == kPslfScalar);
  CHECK(r.scalar.grid.n_x == 4);
  CHECK(r.scalar.grid.n_xi == 5);
  CHECK(r.scalar.grid.h == doctest::Approx(0.25));
  CHECK(r.scalar.time.T == doctest::Approx(0.5));
  CHECK(r.scalar.time.n_t == 3);
  REQUIRE(r.scalar.v.size() == f.v.size());
  for (std::size_t i = 0; i < f.v.size(); ++i) CHECK(r.scalar.v[i] == f.v[i]);
  std::remove(path.c_str());
}

TEST_CASE("PSLF matrix round trip") {
  PhaseGrid g = unit_grid(3, 3);
  TimeGrid tg = TimeGrid::symmetric(1.0, 2, 0.0);
  const MatrixField a = sample_matrix(
      [](double t, double x, double xi, cplx* out) {
        out[0] = cplx(x, t);
        out[1] = cplx(xi, 0.0);
        out[2] = cplx(0.0, -xi);
        out[3] = cplx(-x, t);
      },
      2, g, tg);
  const std::string path = "pslf_roundtrip_matrix.bin";
  write_field(path, a);
  const AnyField r = read_field(path);
  REQUIRE(r.kind == kPslfMatrix);
  REQUIRE(r.matrix.N == 2);
  REQUIRE(r.matrix.v.size() == a.v.size());
  for (std::size_t i = 0; i < a.v.size(); ++i) CHECK(r.matrix.v[i] == a.v[i]);
  std::remove(path.c_str());
}

TEST_CASE("PSLF read rejects malformed files") {
  const std::string path = "pslf_bad.bin";

  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTMAGIC" << std::string(88, '\0');
  }
  CHECK_THROWS_WITH_AS(read_field(path), doctest::Contains("bad magic"), Error);

  // Valid header, truncated payload.
  PhaseGrid g = unit_grid(3, 3);
  TimeGrid tg = TimeGrid::symmetric(1.0, 2, 0.0);
  const ScalarField f = sample_scalar(
      [](double, double x, double) { return x; }, g, tg);
  write_field(path, f);
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 9);
    std::ofstream out(path, std::ios::binary);
    out << bytes;
  }
  CHECK_THROWS_WITH_AS(read_field(path), doctest::Contains("truncated"), Error);
  std::remove(path.c_str());
}

TEST_CASE("matched grids") {
  const PhaseGrid m = PhaseGrid::matched_square(32, 0.1);
  double mult = 0.0, dev = 1.0;
  CHECK(m.matched(&mult, &dev));
  CHECK(mult == doctest::Approx(1.0));
  CHECK(dev <= 1e-12);
  CHECK(m.n_x == 32);
  // Square window: n*dxi == x-extent.
  CHECK(m.x_max - m.x_min ==
        doctest::Approx(static_cast<double>(m.n_xi) * m.dxi()).epsilon(1e-12));

  const PhaseGrid u = unit_grid(8, 8);
  CHECK_FALSE(u.matched(&mult, &dev));
}

TEST_CASE("grid validation errors") {
  PhaseGrid g = unit_grid(0, 3);
  CHECK_THROWS_AS(g.validate(), Error);
  g = unit_grid(3, 3, 2.0);
  CHECK_THROWS_AS(g.validate(), Error);

  TimeGrid tg = TimeGrid::symmetric(1.0, 5, 0.0);
  tg.T = 1.5;
  CHECK_THROWS_AS(tg.validate_horizon(), Error);
  tg.T = 0.75;
  CHECK_NOTHROW(tg.validate_horizon());
}
