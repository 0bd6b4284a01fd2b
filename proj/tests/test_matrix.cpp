#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "fsde/matrix.hpp"

using namespace fsde;
using Dense = DenseMatrix<double>;
using Complexd = std::complex<double>;

namespace {

Dense random_symmetric(Index n, std::uint32_t seed, double scale = 1.0) {
  std::mt19937 eng(seed);
  std::normal_distribution<double> nd;
  Dense a = Dense::NullaryExpr(n, n, [&] { return scale * nd(eng); });
  return ((a + a.transpose()) * 0.5).eval();
}

}  // namespace

TEST_SUITE("matrix") {

TEST_CASE("normalized trace of simple matrices") {
  CHECK(normalized_trace(HMatrix::identity(4)) == 1.0);
  CHECK(normalized_trace(HMatrix::zero(5)) == 0.0);
  Dense d = Dense::Zero(3, 3);
  d.diagonal() << 1.0, 2.0, 3.0;
  CHECK(normalized_trace(HMatrix(d)) == 2.0);
  // Works on arbitrary square Eigen expressions as well.
  CHECK(normalized_trace(2.0 * Dense::Identity(3, 3)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(normalized_trace(Dense::Zero(2, 3)), DimensionMismatch);
}

TEST_CASE("constructor symmetrizes or rejects") {
  Dense m = random_symmetric(5, 11);
  Dense jittered = m;
  jittered(1, 2) += 1e-14 * m.norm();  // below the relative tolerance
  HMatrix h(jittered);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 5; ++j) CHECK(h(i, j) == h(j, i));
  }

  Dense bad = m;
  bad(0, 1) += 1e-3;
  CHECK_THROWS_AS(HMatrix{bad}, InvalidArgument);
  CHECK_THROWS_AS(HMatrix{Dense::Zero(2, 3)}, DimensionMismatch);
  CHECK_THROWS_AS(HMatrix{Dense::Zero(0, 0)}, InvalidArgument);
}

TEST_CASE("symmetric_eig on known spectra") {
  Dense d = Dense::Zero(3, 3);
  d.diagonal() << 3.0, 1.0, 2.0;
  auto sd = symmetric_eig(HMatrix(d));
  CHECK(sd.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sd.eigenvalues(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sd.eigenvalues(2) == doctest::Approx(3.0).epsilon(1e-12));

  Dense flip(2, 2);
  flip << 0.0, 1.0, 1.0, 0.0;
  auto sd2 = symmetric_eig(HMatrix(flip));
  CHECK(sd2.eigenvalues(0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(sd2.eigenvalues(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("symmetric_eig reconstruction and orthogonality") {
  for (std::uint32_t seed : {1u, 2u, 3u}) {
    HMatrix m(random_symmetric(8, seed, 2.0));
    auto sd = symmetric_eig(m);
    const Dense rebuilt = sd.basis * sd.eigenvalues.asDiagonal() * sd.basis.transpose();
    const double scale = std::max(1.0, m.dense().norm());
    CHECK((rebuilt - m.dense()).norm() <= 1e-10 * scale);
    const Dense gram = sd.basis.transpose() * sd.basis;
    CHECK((gram - Dense::Identity(8, 8)).norm() <= 1e-10 * std::sqrt(8.0));
    for (Index i = 1; i < 8; ++i) CHECK(sd.eigenvalues(i) >= sd.eigenvalues(i - 1));
  }
}

TEST_CASE("matrix_function identity, constant and sqrt") {
  HMatrix m(random_symmetric(6, 5));
  const HMatrix same = matrix_function(m, [](double x) { return x; });
  CHECK((same.dense() - m.dense()).norm() <= 1e-10 * std::max(1.0, m.dense().norm()));

  const HMatrix one = matrix_function(m, [](double) { return 1.0; });
  CHECK((one.dense() - Dense::Identity(6, 6)).norm() <= 1e-10);

  Dense d = Dense::Zero(2, 2);
  d.diagonal() << 4.0, 9.0;
  const HMatrix root = matrix_function(HMatrix(d), [](double x) { return std::sqrt(x); });
  CHECK(root(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(root(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("matrix_function sqrt round-trips on random PSD input") {
  for (std::uint32_t seed : {7u, 8u}) {
    const Dense a = random_symmetric(7, seed);
    HMatrix psd((a * a.transpose()).eval());  // PSD by construction
    const HMatrix root = matrix_function(psd, [](double x) { return std::sqrt(std::max(x, 0.0)); });
    const Dense squared = root.dense() * root.dense();
    CHECK((squared - psd.dense()).norm() <= 1e-8 * std::max(1.0, psd.dense().norm()));
  }
}

TEST_CASE("matrix_function rejects out-of-domain eigenvalues") {
  Dense d = Dense::Zero(2, 2);
  d.diagonal() << -1.0, 1.0;
  CHECK_THROWS_AS(matrix_function(HMatrix(d), [](double x) { return std::sqrt(x); }),
                  DomainError);
}

TEST_CASE("abs_trace") {
  Dense d = Dense::Zero(2, 2);
  d.diagonal() << -1.0, 1.0;
  CHECK(abs_trace(HMatrix(d)) == 1.0);
  CHECK(abs_trace(HMatrix::zero(4)) == 0.0);

  HMatrix m(random_symmetric(6, 21));
  const auto vals = symmetric_eig(m).eigenvalues;
  double expected = 0.0;
  for (Index i = 0; i < 6; ++i) expected += std::abs(vals(i));
  expected /= 6.0;
  CHECK(abs_trace(m) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(abs_trace(m) >= std::abs(normalized_trace(m)));
  const double eq = normalized_trace(matrix_function(m, [](double x) { return std::abs(x); }));
  CHECK(abs_trace(m) == doctest::Approx(eq).epsilon(1e-12));
}

TEST_CASE("cauchy transform of atoms") {
  const Complexd i_unit(0.0, 1.0);
  CHECK(std::abs(cauchy_transform(HMatrix::zero(3), i_unit) - i_unit) <= 1e-15);
  CHECK(std::abs(cauchy_transform(HMatrix::identity(3), Complexd(1.0, 1.0)) - i_unit) <= 1e-15);
  CHECK_THROWS_AS(cauchy_transform(HMatrix::identity(2), Complexd(1.0, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(cauchy_transform(HMatrix::identity(2), Complexd(0.0, -1.0)), InvalidArgument);
}

TEST_CASE("cauchy transform of a GOE sample approaches the semicircle transform") {
  // Wigner matrix with entry scaling as the Brownian increments use at
  // t = 1; law approaches semicircle with radius 2.
  const Index n = 500;
  std::mt19937_64 eng(99);
  std::normal_distribution<double> nd;
  Dense a = Dense::NullaryExpr(n, n, [&] { return nd(eng); });
  const double scale = std::sqrt(1.0 / (2.0 * static_cast<double>(n)));
  HMatrix w((scale * (a + a.transpose())).eval());

  // Oracle: composite Simpson of the radius-2 semicircle density against the
  // Cauchy kernel.
  const Complexd z(0.0, 2.0);
  const double radius = 2.0;
  const int intervals = 1 << 14;
  Complexd integral(0.0, 0.0);
  const double h = 2.0 * radius / intervals;
  auto rho = [radius](double x) {
    const double v = radius * radius - x * x;
    return v <= 0.0 ? 0.0 : 2.0 / (M_PI * radius * radius) * std::sqrt(v);
  };
  for (int k = 0; k < intervals; ++k) {
    const double x0 = -radius + k * h;
    const double x1 = x0 + h;
    const double xm = 0.5 * (x0 + x1);
    integral += h / 6.0 *
                (rho(x0) / (Complexd(x0, 0) - z) + 4.0 * rho(xm) / (Complexd(xm, 0) - z) +
                 rho(x1) / (Complexd(x1, 0) - z));
  }
  CHECK(std::abs(cauchy_transform(w, z) - integral) <= 0.05);
}

TEST_CASE("trace and resolvent properties on random input") {
  std::mt19937 eng(31);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    HMatrix a(random_symmetric(6, 100 + rep));
    HMatrix b(random_symmetric(6, 200 + rep));
    const double alpha = coeff(eng);
    const double beta = coeff(eng);

    // Linearity of the normalized trace.
    const double lhs = normalized_trace(alpha * a + beta * b);
    const double rhs = alpha * normalized_trace(a) + beta * normalized_trace(b);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));

    // Trace property phi(AB) = phi(BA).
    const double ab = normalized_trace((a.dense() * b.dense()).eval());
    const double ba = normalized_trace((b.dense() * a.dense()).eval());
    CHECK(std::abs(ab - ba) <= 1e-10 * a.dense().norm() * b.dense().norm());

    // Resolvent bound |G(z)| <= 1 / Im z.
    const Complexd z(coeff(eng), 0.1 + std::abs(coeff(eng)));
    const Complexd g = cauchy_transform(a, z);
    CHECK(std::abs(g) <= 1.0 / z.imag() + 1e-12);
    CHECK(g.imag() > 0.0);
  }
}

}  // TEST_SUITE
