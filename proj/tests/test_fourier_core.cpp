#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"

using namespace sbt;
using Catch::Matchers::WithinAbs;

TEST_CASE("grid rejects bad shapes and excludes Nyquist modes", "[fourier]") {
  CHECK_THROWS_AS(CellGrid(2, 7), std::invalid_argument);
  CHECK_THROWS_AS(CellGrid(4, 8), std::invalid_argument);
  CHECK_THROWS_AS(CellGrid(2, 2), std::invalid_argument);
  const CellGrid g(2, 8);
  CHECK(g.size() == 64);
  CHECK(g.is_active(Mode{3, -3, 0}));
  CHECK_FALSE(g.is_active(Mode{-4, 0, 0}));
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(g.flat(g.mode(j)) == j);
  CHECK(g.flat(Mode{0, 0, 0}) == 0);
}

TEST_CASE("forward and inverse transforms round trip", "[fourier]") {
  for (int dim : {2, 3}) {
    const CellGrid g(dim, 8);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cplx> nodal(g.size());
    for (auto& v : nodal) v = cplx(u(rng), u(rng));
    const auto f = ScalarField::from_nodal(g, nodal);
    const auto back = f.nodal();
    double err = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) err = std::max(err, std::abs(back[j] - nodal[j]));
    CHECK(err < 1e-14);
  }
}

TEST_CASE("a plane wave has a single unit coefficient", "[fourier]") {
  const CellGrid g(3, 8);
  const Mode k{1, -2, 3};
  const auto f = ScalarField::from_function(g, [&](std::size_t, const std::array<double, 3>& y) {
    return std::exp(cplx(0.0, kTwoPi * (k[0] * y[0] + k[1] * y[1] + k[2] * y[2])));
  });
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK_THAT(std::abs(f(0, j) - (j == g.flat(k) ? 1.0 : 0.0)), WithinAbs(0.0, 1e-13));
  }
  CHECK_THAT(f.l2_norm(), WithinAbs(1.0, 1e-13));
}

TEST_CASE("shifted gradient matches the analytic derivative", "[fourier]") {
  const CellGrid g(2, 16);
  RealVector theta(2);
  theta << 0.3, -0.2;
  // s = sin(2 pi y1) cos(4 pi y2); D(theta) s = grad s + i theta s.
  const auto s = ScalarField::from_function(g, [](std::size_t, const std::array<double, 3>& y) {
    return cplx(std::sin(kTwoPi * y[0]) * std::cos(2 * kTwoPi * y[1]), 0.0);
  });
  const auto expected = VectorField::from_function(g, [&](std::size_t c, const std::array<double, 3>& y) {
    const double v = std::sin(kTwoPi * y[0]) * std::cos(2 * kTwoPi * y[1]);
    const double d = c == 0 ? kTwoPi * std::cos(kTwoPi * y[0]) * std::cos(2 * kTwoPi * y[1])
                            : -2 * kTwoPi * std::sin(kTwoPi * y[0]) * std::sin(2 * kTwoPi * y[1]);
    return cplx(d, theta[static_cast<Eigen::Index>(c)] * v);
  });
  const auto grad = shifted_gradient(s, theta);
  CHECK((grad - expected).l2_norm() < 1e-12);
}

TEST_CASE("dealiased products of resolved trigonometric fields are exact", "[fourier]") {
  const CellGrid g(2, 16);
  const auto mu = ScalarField::from_function(g, [](std::size_t, const std::array<double, 3>& y) {
    return cplx(1.0 + 0.5 * std::cos(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]), 0.0);
  });
  const auto v = VectorField::from_function(g, [](std::size_t c, const std::array<double, 3>& y) {
    return cplx(c == 0 ? std::sin(3 * kTwoPi * y[1]) : std::cos(2 * kTwoPi * (y[0] - y[1])), 0.0);
  });
  const auto exact = VectorField::from_function(g, [](std::size_t c, const std::array<double, 3>& y) {
    const double m = 1.0 + 0.5 * std::cos(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]);
    return cplx(m * (c == 0 ? std::sin(3 * kTwoPi * y[1]) : std::cos(2 * kTwoPi * (y[0] - y[1]))), 0.0);
  });
  CHECK((coeff_multiply(mu, v) - exact).l2_norm() < 1e-13);
}

TEST_CASE("Leray projection is idempotent and divergence free", "[fourier]") {
  for (int dim : {2, 3}) {
    const CellGrid g(dim, 8);
    RealVector theta = RealVector::Constant(dim, 0.0);
    theta[0] = 0.25;
    auto v = random_field<FieldRank::vector>(g, 11);
    leray_project(v, theta);
    CHECK(max_coefficient(shifted_divergence(v, theta)) < 1e-13);
    auto w = v;
    leray_project(w, theta);
    CHECK((w - v).l2_norm() < 1e-14 * v.l2_norm());
  }
}

TEST_CASE("viscous operator is Hermitian and nonnegative", "[fourier]") {
  const CellGrid g(2, 12);
  const auto mu = ScalarField::from_function(g, [](std::size_t, const std::array<double, 3>& y) {
    return cplx(1.0 + 0.4 * std::cos(kTwoPi * y[0]) + 0.2 * std::sin(kTwoPi * (y[0] + 2 * y[1])), 0.0);
  });
  const PaddedCoefficient pc(mu);
  RealVector theta(2);
  theta << 0.1, 0.05;
  const auto u = random_field<FieldRank::vector>(g, 1);
  const auto v = random_field<FieldRank::vector>(g, 2);
  for (auto kind : {GradientKind::full_gradient, GradientKind::symmetrized}) {
    const cplx a = inner(apply_viscous(pc, u, theta, kind), v);
    const cplx b = inner(u, apply_viscous(pc, v, theta, kind));
    CHECK(std::abs(a - b) < 1e-11 * std::abs(a));
    CHECK(inner(apply_viscous(pc, u, theta, kind), u).real() > 0.0);
  }
}

TEST_CASE("constant viscosity acts as a Fourier multiplier", "[fourier]") {
  const CellGrid g(3, 8);
  const double c = 3.0;
  ScalarField mu(g);
  mu(0, 0) = c;
  const PaddedCoefficient pc(mu);
  RealVector theta(3);
  theta << 0.05, -0.02, 0.01;
  auto v = random_field<FieldRank::vector>(g, 5);
  leray_project(v, theta);
  auto full = apply_viscous(pc, v, theta, GradientKind::full_gradient);
  auto sym = apply_viscous(pc, v, theta, GradientKind::symmetrized);
  double err_full = 0.0, err_sym = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const auto k = shifted_wavevector(g, j, theta);
    const double g2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    for (std::size_t p = 0; p < 3; ++p) {
      err_full = std::max(err_full, std::abs(full(p, j) - c * g2 * v(p, j)));
      err_sym = std::max(err_sym, std::abs(sym(p, j) - 0.5 * c * g2 * v(p, j)));
    }
  }
  CHECK(err_full < 1e-11);
  CHECK(err_sym < 1e-11);
}

TEST_CASE("shift parameter normalizes and validates", "[fourier]") {
  const ShiftParameter s(unit(3.0, 4.0) * 5.0, 0.2);
  CHECK_THAT(s.direction().norm(), WithinAbs(1.0, 1e-15));
  CHECK_THAT(s.shift()[0], WithinAbs(0.12, 1e-15));
  CHECK_THROWS(ShiftParameter(RealVector::Zero(2), 0.1));
  CHECK_THROWS(ShiftParameter(unit(1.0, 0.0), -0.1));
}
