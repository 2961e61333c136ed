#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "support.hpp"

using namespace sbt;

namespace {

/// Sorted spectrum of the constant-viscosity operator on the basis modes:
/// s c |2 pi k + theta|^2, d-1 copies per mode.
std::vector<double> constant_spectrum(const DivFreeBasis& basis, double c, double s) {
  std::vector<double> out;
  for (std::size_t m = 0; m < basis.modes.size(); ++m) {
    const auto g = shifted_wavevector(basis.grid, basis.modes[m], basis.theta());
    const double g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    for (int a = 0; a < basis.per_mode(); ++a) out.push_back(s * c * g2);
  }
  std::sort(out.begin(), out.end());
  return out;
}

PaddedCoefficient coefficient(const ViscosityModel& m, int d, int n) {
  return PaddedCoefficient(sample_viscosity(m, CellGrid(d, n)).field);
}

}  // namespace

TEST_CASE("constant viscosity spectrum is the shifted Laplacian symbol", "[bloch]") {
  for (int d : {2, 3}) {
    const int n = d == 2 ? 16 : 8;
    const RealVector eta = d == 2 ? unit(1.0, 0.3) : unit(0.2, -0.5, 1.0);
    for (double c : {0.5, 1.0, 3.0}) {
      const auto pc = coefficient(ViscosityModel::constant(c), d, n);
      for (auto kind : {GradientKind::full_gradient, GradientKind::symmetrized}) {
        const auto basis = build_divfree_basis(pc.grid(), eta, 0.1);
        const auto vals = dense_all_eigenvalues(assemble_shifted_operator(pc, basis, kind));
        const auto expected = constant_spectrum(basis, c, kind == GradientKind::symmetrized ? 0.5 : 1.0);
        REQUIRE(static_cast<std::size_t>(vals.size()) == expected.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < expected.size(); ++i) {
          worst = std::max(worst, std::abs(vals[static_cast<Eigen::Index>(i)] - expected[i]) / expected[i]);
        }
        CHECK(worst < 1e-10);
      }
    }
  }
}

TEST_CASE("dense assembly matches the matrix-free operator", "[bloch]") {
  const auto pc = coefficient(ViscosityModel::product_cosine(1.0, {0.5, 0.3}), 2, 12);
  const auto basis = build_divfree_basis(pc.grid(), unit(0.6, 0.8), 0.2);
  std::mt19937 rng(9);
  std::normal_distribution<double> normal;
  ComplexVector c(basis.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = cplx(normal(rng), normal(rng));
  for (auto kind : {GradientKind::full_gradient, GradientKind::symmetrized}) {
    const ComplexMatrix H = assemble_shifted_operator(pc, basis, kind);
    CHECK((H - H.adjoint()).norm() < 1e-12 * H.norm());
    CHECK((H * c - apply_shifted_operator(pc, basis, c, kind)).norm() < 1e-11 * (H * c).norm());
  }
}

TEST_CASE("iterative and dense eigensolvers agree", "[bloch]") {
  const auto pc = coefficient(ViscosityModel::product_cosine(1.0, {0.5, 0.3, 0.2}), 3, 8);
  const RealVector eta = unit(1.0, 1.0, 0.5);
  BlochOptions dense, iterative;
  iterative.dense_limit = 0;
  for (auto kind : {GradientKind::full_gradient, GradientKind::symmetrized}) {
    const auto a = lowest_branches(pc, eta, 0.05, 4, kind, dense);
    const auto b = lowest_branches(pc, eta, 0.05, 4, kind, iterative);
    CHECK(a.dense);
    CHECK_FALSE(b.dense);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(a.values[i] - b.values[i]) < 1e-10 * std::max(1.0, a.values[i]));
    CHECK(a.rayleigh_deviation < 1e-11);
    CHECK(b.rayleigh_deviation < 1e-11);
  }
}

TEST_CASE("lowest branches of constant viscosity are c delta^2", "[bloch]") {
  const double c = 3.0;
  for (int d : {2, 3}) {
    const auto pc = coefficient(ViscosityModel::constant(c), d, 8);
    const RealVector eta = d == 2 ? unit(1.0, 2.0) : unit(1.0, 2.0, 2.0);
    const auto full = lowest_branches(pc, eta, 0.1, d - 1, GradientKind::full_gradient);
    const auto sym = lowest_branches(pc, eta, 0.1, d - 1, GradientKind::symmetrized);
    for (int m = 0; m < d - 1; ++m) {
      CHECK(std::abs(full.values[m] - c * 0.01) < 1e-10 * c * 0.01);
      CHECK(std::abs(sym.values[m] - 0.5 * c * 0.01) < 1e-10 * c * 0.01);
    }
    if (d == 3) CHECK(full.near_degenerate);
  }
}

TEST_CASE("shift magnitude above the cap is rejected", "[bloch]") {
  const auto pc = coefficient(ViscosityModel::constant(1.0), 2, 8);
  BlochOptions opts;
  opts.delta_max = 0.3;
  CHECK_THROWS_AS(lowest_branches(pc, unit(1.0, 0.0), 0.4, 1, GradientKind::full_gradient, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS(track_branches(pc, unit(1.0, 0.0), {0.1, 0.2}, GradientKind::full_gradient),
                  std::invalid_argument);
}

TEST_CASE("pinned polynomial fit recovers exact coefficients", "[bloch]") {
  const auto x = geometric_ladder(0.1, 7);
  std::vector<double> y;
  for (double t : x) y.push_back(2e-3 * t + 1.5 * t * t - 0.7 * t * t * t + 0.2 * t * t * t * t);
  const auto fit = fit_pinned_polynomial(x, y, 4);
  CHECK(std::abs(fit.coefficients[0] - 2e-3) < 1e-12);
  CHECK(std::abs(fit.coefficients[1] - 1.5) < 1e-10);
  CHECK(std::abs(fit.coefficients[2] + 0.7) < 1e-8);
  CHECK_FALSE(fit.ill_conditioned);
  CHECK_THROWS_AS(fit_pinned_polynomial({0.1, 0.05}, {1.0, 2.0}, 4), std::invalid_argument);
}

TEST_CASE("constant viscosity fits give zero slope and curvature c", "[bloch]") {
  const double c = 0.5;
  for (int d : {2, 3}) {
    const auto pc = coefficient(ViscosityModel::constant(c), d, 8);
    const RealVector eta = d == 2 ? unit(0.3, 1.0) : unit(0.3, 1.0, -0.4);
    for (auto kind : {GradientKind::full_gradient, GradientKind::symmetrized}) {
      auto br = track_branches(pc, eta, geometric_ladder(), kind);
      fit_derivatives(br);
      const double s = kind == GradientKind::symmetrized ? 0.5 : 1.0;
      for (int m = 0; m < br.count(); ++m) {
        CHECK(std::abs(br.lambda1(m)) <= 1e-8);
        CHECK(std::abs(br.half_lambda2(m) - s * c) <= 1e-8);
        CHECK(std::abs(br.q01(m)) <= 1e-8);
        CHECK(std::abs(br.half_q02(m)) <= 1e-8);
        CHECK(std::abs(br.phi0[static_cast<std::size_t>(m)].dot(br.direction)) < 1e-12);
      }
    }
  }
}

TEST_CASE("layered branches are tracked without crossings", "[bloch]") {
  const auto pc = coefficient(ViscosityModel::layered_cosine(1.0, 0.5, 0), 2, 16);
  auto br = track_branches(pc, unit(1.0, 1.0), geometric_ladder(), GradientKind::full_gradient);
  fit_derivatives(br);
  CHECK_FALSE(br.degenerate);
  for (const auto& s : br.samples[0]) CHECK(s.overlap > 0.99);
  CHECK(br.max_zero_mode_transverse < 1e-9);
  CHECK(br.max_imag_q0 < 1e-9);
  CHECK(std::abs(br.lambda1(0)) < 1e-8);
  CHECK(br.half_lambda2(0) > 0.0);
}

TEST_CASE("eigenfunction derivatives follow the correctors", "[bloch]") {
  const auto mu = sample_viscosity(ViscosityModel::layered_cosine(1.0, 0.5, 0), CellGrid(2, 32));
  const PaddedCoefficient pc(mu.field);
  for (auto kind : {GradientKind::full_gradient, GradientKind::symmetrized}) {
    const auto cells = solve_cell_problems(mu, kind);
    for (const RealVector& eta : {unit(1.0, 0.4), unit(-0.3, 1.0)}) {
      auto br = track_branches(pc, eta, geometric_ladder(), kind);
      fit_derivatives(br);
      const auto chk = check_first_order_eigenfunction(pc, br.direction, br.phi0[0], cells, 1e-3, true);
      CHECK(chk.phi_residual < 1e-4);
      CHECK(chk.q_residual < 1e-4);
      CHECK(chk.phase_drift < 1e-6);
    }
  }
}
