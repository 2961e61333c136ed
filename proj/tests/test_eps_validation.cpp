#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace sbt;

TEST_CASE("constant viscosity oscillating solve equals the homogenized one", "[eps]") {
  for (int d : {2, 3}) {
    for (auto kind : {GradientKind::full_gradient, GradientKind::symmetrized}) {
      const double c = 1.7;
      EpsProblem prob{ViscosityModel::constant(c), Forcing::standard(d), kind, d, 2, 8};
      const auto fine = solve_eps(prob);
      const Tensor4 A = kind == GradientKind::symmetrized ? constant_sym_tensor(d, c) : Tensor4::identity(d, c);
      const auto hom = solve_homogenized(A, Forcing::standard(d).sample(fine.u.grid()));
      CHECK((fine.u - hom.u).l2_norm() < 1e-12);
      CHECK(weighted_pressure_distance(fine.p, hom.p) < 1e-12);
    }
  }
}

TEST_CASE("oscillating and homogenized solutions are divergence free", "[eps]") {
  EpsProblem prob{ViscosityModel::layered_cosine(1.0, 1.0 / 3.0, 0), Forcing::standard(2),
                  GradientKind::full_gradient, 2, 4, 16};
  const auto fine = solve_eps(prob);
  const RealVector zero = RealVector::Zero(2);
  CHECK(max_coefficient(shifted_divergence(fine.u, zero)) < 1e-11);
  CHECK(fine.report.relative_residual <= 1e-11);
  const auto hom = solve_homogenized(Tensor4::identity(2, 1.0), Forcing::standard(2).sample(fine.u.grid()));
  CHECK(max_coefficient(shifted_divergence(hom.u, zero)) < 1e-11);
}

TEST_CASE("homogenized solution is blind to kernel perturbations", "[eps]") {
  for (int d : {2, 3}) {
    const CellGrid g(d, 8);
    const auto mu = sample_viscosity(ViscosityModel::layered_cosine(1.0, 0.5, 0), g);
    const Tensor4 A = homogenize(mu, GradientKind::full_gradient).tensor.entries;
    const std::size_t pairs = static_cast<std::size_t>(d * (d - 1) / 2);
    std::vector<double> coeffs(pairs * pairs);
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] = 0.3 + 0.1 * static_cast<double>(i);
    const Tensor4 B = A + 0.8 * Tensor4::i_otimes_i(d) + antisymmetric_kernel_tensor(d, coeffs);
    const auto f = Forcing::standard(d).sample(CellGrid(d, 16));
    const auto a = solve_homogenized(A, f);
    const auto b = solve_homogenized(B, f);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.u.coefficients().size(); ++i) {
      worst = std::max(worst, std::abs(a.u.coefficients()[i] - b.u.coefficients()[i]));
    }
    CHECK(worst < 1e-11);
  }
}

TEST_CASE("singular homogenized operators are refused", "[eps]") {
  const auto f = Forcing::standard(2).sample(CellGrid(2, 8));
  CHECK_THROWS_AS(solve_homogenized(Tensor4(2), f), std::domain_error);
}

TEST_CASE("forcing must be mean-zero and resolved", "[eps]") {
  Forcing bad;
  bad.terms.push_back({{0, 0, 0}, {1, 0, 0}, {0, 0, 0}});
  CHECK_THROWS_AS(bad.validate(2), std::invalid_argument);
  Forcing high;
  high.terms.push_back({{5, 0, 0}, {0, 1, 0}, {0, 0, 0}});
  CHECK_THROWS_AS(high.sample(CellGrid(2, 8)), std::invalid_argument);
  CHECK_NOTHROW(Forcing::standard(3).validate(3));
}

TEST_CASE("convergence study reduces the error with eps", "[eps]") {
  const auto rep = convergence_study(ViscosityModel::layered_cosine(1.0, 1.0 / 3.0, 0), Forcing::standard(2),
                                     GradientKind::full_gradient, 2, {2, 4, 8}, 16);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.monotone);
  CHECK(rep.slope_u > 0.9);
  CHECK(rep.norm_ratio_u < 2.0);
  CHECK(rep.norm_ratio_p < 2.0);
  CHECK(rep.rows.back().err_naive > 2.0 * rep.rows.back().err_u);
  CHECK_THROWS_AS(convergence_study(ViscosityModel::constant(1.0), Forcing::standard(2),
                                    GradientKind::full_gradient, 2, {4, 2}, 16),
                  std::invalid_argument);
}
