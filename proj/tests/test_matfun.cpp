// Dense matrix kernels: expm, expm_integral, logm, spectral_radius.

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/LU>

#include "ecodyn/graphs.hpp"
#include "ecodyn/matfun.hpp"
#include "support.hpp"

using namespace ecodyn;

TEST_CASE("expm of the zero matrix is exactly the identity") {
  const MatFunResult r = expm(Matrix::Zero(3, 3));
  CHECK(r.value == Matrix::Identity(3, 3));
  CHECK(std::isfinite(r.est_error));
}

TEST_CASE("expm of a nilpotent matrix terminates the series") {
  Matrix n(2, 2);
  n << 0.0, 1.0, 0.0, 0.0;
  Matrix want(2, 2);
  want << 1.0, 1.0, 0.0, 1.0;
  CHECK(testsup::max_abs(expm(n).value - want) <= 1e-15);
}

TEST_CASE("expm agrees with a high-order Taylor oracle on random Metzler matrices") {
  testsup::Rng rng(101);
  for (int rep = 0; rep < 25; ++rep) {
    const Index n = 1 + static_cast<Index>(rng.uniform_int(0, 5));
    const Matrix m = testsup::random_metzler(rng, n, 1.5, -2.0, 0.5);
    const Matrix want = testsup::expm_taylor(m);
    CHECK(testsup::rel_err(expm(m).value, want) < 1e-12);
  }
  SECTION("norms past the scaling threshold") {
    const Matrix m = 40.0 * testsup::random_metzler(rng, 4, 1.0, -2.0, -0.5);
    CHECK(testsup::rel_err(expm(m).value, testsup::expm_taylor(m)) < 1e-11);
  }
}

TEST_CASE("expm satisfies the semigroup property") {
  testsup::Rng rng(102);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix m = testsup::random_metzler(rng, 4, 1.0, -1.5, 0.0);
    const double s = rng.uniform(0.0, 1.0);
    const double t = rng.uniform(0.0, 1.0);
    const Matrix lhs = expm(Matrix(m * s)).value * expm(Matrix(m * t)).value;
    const Matrix rhs = expm(Matrix(m * (s + t))).value;
    CHECK(testsup::rel_err(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("expm of a Metzler matrix is entrywise nonnegative") {
  testsup::Rng rng(103);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.uniform_int(0, 5));
    const Matrix m = testsup::random_metzler(rng, n, 2.0, -3.0, 0.0);
    const double dt = rng.uniform(0.0, 4.0);
    const Matrix e = expm(Matrix(m * dt)).value;
    CHECK(e.minCoeff() >= -1e-12 * std::max(1.0, testsup::max_abs(e)));
  }
}

TEST_CASE("expm rejects non-finite input and overflow-scale norms") {
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(expm(bad), std::invalid_argument);
  // || 2^-64 A || must come below theta_13; 2^70 is past the squaring budget.
  CHECK_THROWS_AS(expm(Matrix(std::ldexp(1.0, 70) * Matrix::Identity(2, 2))), NumericalError);
}

TEST_CASE("expm_integral closed forms") {
  SECTION("zero generator: constant integrand") {
    const ExpmIntegralResult r = expm_integral(Matrix::Zero(2, 2), 2.0);
    CHECK(testsup::max_abs(r.e - Matrix::Identity(2, 2)) <= 1e-15);
    CHECK(testsup::max_abs(r.b - 2.0 * Matrix::Identity(2, 2)) <= 1e-14);
  }
  SECTION("scalar decay") {
    const ExpmIntegralResult r = expm_integral(-Matrix::Identity(1, 1), 1.0);
    CHECK(r.e(0, 0) == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(r.b(0, 0) == Catch::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  }
  SECTION("dt = 0 gives the identity and a zero integral exactly") {
    testsup::Rng rng(104);
    const Matrix m = testsup::random_metzler(rng, 3, 1.0, -2.0, -0.5);
    const ExpmIntegralResult r = expm_integral(m, 0.0);
    CHECK(r.e == Matrix::Identity(3, 3));
    CHECK(r.b == Matrix::Zero(3, 3));
  }
}

TEST_CASE("expm_integral matches the direct-inverse formula on invertible generators") {
  testsup::Rng rng(105);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 1 + static_cast<Index>(rng.uniform_int(0, 5));
    const Generator g = testsup::random_hurwitz_generator(rng, n);
    const double dt = rng.uniform(0.05, 2.0);
    const ExpmIntegralResult r = expm_integral(g.m, dt);
    const Matrix direct =
        Eigen::PartialPivLU<Matrix>(g.m).solve(Matrix(r.e - Matrix::Identity(n, n)));
    CHECK(testsup::rel_err(r.b, direct) < 1e-10);
    CHECK(r.b.minCoeff() >= -1e-12 * std::max(1.0, testsup::max_abs(r.b)));
  }
}

TEST_CASE("expm_integral handles singular generators (negative Laplacian)") {
  // Row-sum decay makes M = -L singular: e^{M dt} preserves mass along the
  // left null vector, and B stays finite where the inverse formula breaks.
  Matrix w(3, 3);
  w << 0.0, 1.0, 0.5, 0.2, 0.0, 0.3, 0.7, 0.4, 0.0;
  Matrix m = w;
  m.diagonal() = -w.rowwise().sum();
  const ExpmIntegralResult r = expm_integral(m, 1.5);
  CHECK(r.e.allFinite());
  CHECK(r.b.allFinite());
  // Oracle: columns of B solve x' = M x + e_j from x(0) = 0.
  for (Index j = 0; j < 3; ++j) {
    Vector rhs = Vector::Zero(3);
    rhs[j] = 1.0;
    const Vector want = testsup::integrate_rk45(
        [&](double, const Vector& x) { return Vector(m * x + rhs); }, Vector::Zero(3), 0.0, 1.5,
        1e-12, 1e-14);
    CHECK(testsup::rel_err(Vector(r.b.col(j)), want) < 1e-9);
  }
}

TEST_CASE("logm closed forms and round trips") {
  SECTION("identity maps to the zero matrix") {
    CHECK(logm(Matrix::Identity(3, 3)).value == Matrix::Zero(3, 3));
  }
  SECTION("diagonal case") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = std::exp(1.0);
    a(1, 1) = std::exp(2.0);
    const Matrix l = logm(a).value;
    CHECK(l(0, 0) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(l(1, 1) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(l(0, 1)) + std::abs(l(1, 0)) < 1e-13);
  }
  SECTION("logm(expm(M)) recovers Metzler M with moderate norm") {
    testsup::Rng rng(106);
    for (int rep = 0; rep < 15; ++rep) {
      const Index n = 1 + static_cast<Index>(rng.uniform_int(0, 4));
      const Matrix m = testsup::random_metzler(rng, n, 0.4, -1.0, 0.2);
      const Matrix back = logm(expm(m).value).value;
      CHECK(testsup::rel_err(back, m) < 1e-8);
    }
  }
  SECTION("expm(logm(A)) returns A") {
    testsup::Rng rng(107);
    for (int rep = 0; rep < 10; ++rep) {
      const Matrix m = testsup::random_metzler(rng, 3, 0.5, -1.2, 0.1);
      const Matrix a = expm(m).value;
      CHECK(testsup::rel_err(expm(logm(a).value).value, a) < 1e-8);
    }
  }
}

TEST_CASE("logm rejects spectra on the closed negative real axis") {
  Matrix neg = Matrix::Identity(2, 2);
  neg(0, 0) = -1.0;
  CHECK_THROWS_AS(logm(neg), LogBranchError);
  Matrix sing = Matrix::Identity(2, 2);
  sing(1, 1) = 0.0;
  CHECK_THROWS_AS(logm(sing), LogBranchError);
  // A rotation by pi has eigenvalues -1 (double): also rejected.
  Matrix rot(2, 2);
  rot << -1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(logm(rot), LogBranchError);
}

TEST_CASE("spectral_radius on closed-form graphs") {
  SECTION("zero matrix") {
    const SpectralRadiusResult r = spectral_radius(Matrix::Zero(3, 3));
    CHECK(r.radius == Catch::Approx(0.0).margin(1e-14));
  }
  SECTION("complete graph on three nodes") {
    const SpectralRadiusResult r = spectral_radius(graphs::complete(3));
    CHECK(r.radius == Catch::Approx(2.0).epsilon(1e-12));
  }
  SECTION("star with four leaves") {
    const SpectralRadiusResult r = spectral_radius(graphs::star(5));
    CHECK(r.radius == Catch::Approx(2.0).epsilon(1e-12));
    CHECK((r.eigvec.array() >= 0.0).all());
    CHECK(r.eigvec.sum() == Catch::Approx(1.0).epsilon(1e-12));
  }
  SECTION("cycle graphs have radius 2") {
    CHECK(spectral_radius(graphs::cycle(6)).radius == Catch::Approx(2.0).epsilon(1e-12));
  }
  SECTION("path graph needs the dense fallback (bipartite oscillation)") {
    const SpectralRadiusResult r = spectral_radius(graphs::path(3));
    CHECK(r.radius == Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(r.dense_fallback);
  }
}

TEST_CASE("spectral_radius residual bound holds on random nonnegative matrices") {
  testsup::Rng rng(108);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.uniform_int(0, 6));
    Matrix a(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) a(i, j) = rng.uniform(0.0, 2.0);
    const SpectralRadiusResult r = spectral_radius(a);
    const double norm = testsup::max_abs(a);
    CHECK(testsup::max_abs(Vector(a * r.eigvec - r.radius * r.eigvec)) <=
          1e-10 * std::max(1.0, norm));
    CHECK((r.eigvec.array() >= -1e-14).all());
  }
}

TEST_CASE("spectral_radius rejects negative entries") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = -1.0;
  CHECK_THROWS_AS(spectral_radius(a), std::invalid_argument);
}
