#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokes_bloch/cell_problem.hpp"
#include "stokes_bloch/field.hpp"
#include "stokes_bloch/operators.hpp"
#include "stokes_bloch/parallel.hpp"
#include "stokes_bloch/solver.hpp"
#include "stokes_bloch/tensor.hpp"
#include "stokes_bloch/viscosity.hpp"

namespace stokes_bloch {

/// One trigonometric term of a forcing: c cos(2 pi k.x) + s sin(2 pi k.x).
struct ForcingTerm {
  Mode k{0, 0, 0};
  std::array<double, 3> cos_amplitude{0.0, 0.0, 0.0};
  std::array<double, 3> sin_amplitude{0.0, 0.0, 0.0};
};

/// A mean-zero trigonometric forcing on the unit torus.
struct Forcing {
  std::vector<ForcingTerm> terms;

  void validate(int dim) const {
    if (terms.empty()) throw std::invalid_argument("forcing has no terms");
    for (const auto& t : terms) {
      bool zero = true;
      for (int a = 0; a < dim; ++a) zero = zero && t.k[a] == 0;
      if (zero) throw std::invalid_argument("forcing must be mean-zero (zero wavevector term)");
      for (int a = dim; a < 3; ++a) {
        if (t.k[a] != 0) throw std::invalid_argument("forcing wavevector has wrong dimension");
      }
    }
  }

  /// Fourier coefficients on a grid (all wavevectors must be active there).
  VectorField sample(const CellGrid& grid) const {
    validate(grid.dim());
    VectorField f(grid);
    for (const auto& t : terms) {
      if (!grid.is_active(t.k)) throw std::invalid_argument("forcing mode is not resolved by the grid");
      const Mode mk{-t.k[0], -t.k[1], -t.k[2]};
      const std::size_t jp = grid.flat(t.k);
      const std::size_t jm = grid.flat(mk);
      for (int a = 0; a < grid.dim(); ++a) {
        const cplx c = 0.5 * cplx(t.cos_amplitude[a], -t.sin_amplitude[a]);
        f(static_cast<std::size_t>(a), jp) += c;
        f(static_cast<std::size_t>(a), jm) += std::conj(c);
      }
    }
    return f;
  }

  int max_wavenumber() const {
    int m = 0;
    for (const auto& t : terms) {
      for (int a = 0; a < 3; ++a) m = std::max(m, std::abs(t.k[a]));
    }
    return m;
  }

  /// f = (sin 2 pi x2 + cos 2 pi(x1 + x2), sin 2 pi x1 - cos 2 pi(x1 - x2)) in 2D; a
  /// similar three-term field in 3D.
  static Forcing standard(int dim) {
    Forcing f;
    if (dim == 2) {
      f.terms.push_back({{0, 1, 0}, {0, 0, 0}, {1, 0, 0}});
      f.terms.push_back({{1, 1, 0}, {1, 0, 0}, {0, 0, 0}});
      f.terms.push_back({{1, 0, 0}, {0, 0, 0}, {0, 1, 0}});
      f.terms.push_back({{1, -1, 0}, {0, -1, 0}, {0, 0, 0}});
    } else {
      f.terms.push_back({{0, 1, 0}, {0, 0, 0}, {1, 0, 0}});
      f.terms.push_back({{0, 0, 1}, {0, 0, 0}, {0, 1, 0}});
      f.terms.push_back({{1, 0, 0}, {0, 0, 0}, {0, 0, 1}});
      f.terms.push_back({{1, 1, 0}, {1, 0, -1}, {0, 0, 0}});
    }
    return f;
  }
};

/**
 * @brief Oscillating Stokes problem on the unit torus with
 * mu_eps(x) = mu(periods * x), eps = 1/periods.
 */
struct EpsProblem {
  ViscosityModel model;
  Forcing forcing;
  GradientKind kind = GradientKind::full_gradient;
  int dim = 2;
  int periods = 1;
  /// Grid points per period of mu_eps; the fine grid has periods * cell_resolution points per axis.
  int cell_resolution = 16;

  double eps() const { return 1.0 / periods; }
  int fine_resolution() const { return periods * cell_resolution; }
};

struct FlowSolution {
  VectorField u;
  ScalarField p;
  CgReport report;
};

/// Solves -div(mu_eps S u) + grad p = f, div u = 0 with mean-zero u and p.
inline FlowSolution solve_eps(const EpsProblem& prob, const SolverOptions& opts = {}) {
  if (prob.periods < 1) throw std::invalid_argument("1/eps must be a positive integer");
  if (prob.cell_resolution < 8) throw std::invalid_argument("at least 8 points per period are required");
  const CellGrid grid(prob.dim, prob.fine_resolution());
  const SampledViscosity mu = sample_viscosity(prob.model, grid, prob.periods);
  const PaddedCoefficient pc(mu.field);
  const VectorField f = prob.forcing.sample(grid);
  const RealVector zero = RealVector::Zero(prob.dim);
  FlowSolution sol{VectorField(grid), ScalarField(grid), {}};
  sol.report = solve_projected(pc, f, zero, prob.kind, sol.u, opts);
  VectorField r = f - apply_viscous(pc, sol.u, zero, prob.kind);
  sol.p = longitudinal_potential(r, zero);
  return sol;
}

/**
 * Constant-coefficient homogenized Stokes solve, mode by mode:
 * [ |xi|^2 M(xi/|xi|, A)^t   i xi ] [u]   [f]
 * [ i xi^t                    0   ] [p] = [0].
 * Throws if a mode system is singular (Legendre-Hadamard failure).
 */
inline FlowSolution solve_homogenized(const Tensor4& A, const VectorField& f) {
  const CellGrid& grid = f.grid();
  const int d = grid.dim();
  if (A.dim() != d) throw std::invalid_argument("tensor and forcing dimensions differ");
  FlowSolution sol{VectorField(grid), ScalarField(grid), {}};
  const RealVector zero = RealVector::Zero(d);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (!grid.is_active(j)) continue;
    bool any = false;
    for (int a = 0; a < d; ++a) any = any || f(static_cast<std::size_t>(a), j) != cplx(0.0, 0.0);
    if (!any) continue;
    const auto xi = shifted_wavevector(grid, j, zero);
    Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(d + 1, d + 1);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(d + 1);
    for (int l = 0; l < d; ++l) {
      for (int k = 0; k < d; ++k) {
        double s = 0.0;
        for (int a = 0; a < d; ++a) {
          for (int b = 0; b < d; ++b) s += A(k, l, a, b) * xi[a] * xi[b];
        }
        K(l, k) = s;
      }
      K(l, d) = cplx(0.0, xi[l]);
      K(d, l) = cplx(0.0, xi[l]);
      rhs[l] = f(static_cast<std::size_t>(l), j);
    }
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(K);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) throw std::domain_error("homogenized mode system is singular (ellipticity lost)");
    const Eigen::VectorXcd x = lu.solve(rhs);
    for (int k = 0; k < d; ++k) sol.u(static_cast<std::size_t>(k), j) = x[k];
    sol.p(0, j) = x[d];
  }
  sol.report.converged = true;
  return sol;
}

/// Pressure distance sum |p1 - p2|^2 / |2 pi k|^2 over nonzero modes, square-rooted.
inline double weighted_pressure_distance(const ScalarField& p1, const ScalarField& p2) {
  const CellGrid& grid = p1.grid();
  const RealVector zero = RealVector::Zero(grid.dim());
  double s = 0.0;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const auto g = shifted_wavevector(grid, j, zero);
    double g2 = 0.0;
    for (int a = 0; a < grid.dim(); ++a) g2 += g[a] * g[a];
    s += std::norm(p1(0, j) - p2(0, j)) / g2;
  }
  return std::sqrt(s);
}

struct ConvergenceRow {
  double eps = 0.0;
  double err_u = 0.0;
  double err_p = 0.0;
  double err_naive = 0.0;
  double norm_u = 0.0;
  double norm_p = 0.0;
  double max_divergence = 0.0;
  int iterations = 0;
  double solver_residual = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  /// Log-log least-squares slope of err_u against eps.
  double slope_u = 0.0;
  double slope_p = 0.0;
  bool monotone = true;
  /// max over the ladder / min over the ladder of the solution norms.
  double norm_ratio_u = 1.0;
  double norm_ratio_p = 1.0;
  double max_divergence = 0.0;
  Tensor4 tensor{2};
  std::vector<std::string> warnings;
};

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

/**
 * Runs the oscillating problem for each 1/eps in `periods` (increasing) and
 * compares with the homogenized solution built from the cell tensor, and
 * with the constant mean-viscosity solution.
 */
inline ConvergenceReport convergence_study(const ViscosityModel& model, const Forcing& forcing, GradientKind kind,
                                           int dim, const std::vector<int>& periods, int cell_resolution,
                                           const CellSolverOptions& cell_opts = {}, int jobs = 1) {
  if (periods.size() < 2) throw std::invalid_argument("convergence ladder needs at least two entries");
  for (std::size_t i = 1; i < periods.size(); ++i) {
    if (periods[i] <= periods[i - 1]) throw std::invalid_argument("eps ladder must be strictly decreasing");
  }
  const CellGrid cell(dim, cell_resolution);
  const SampledViscosity mu_cell = sample_viscosity(model, cell);
  ConvergenceReport rep;
  rep.tensor = homogenized_tensor(mu_cell, kind, cell_opts, model.describe()).entries;
  rep.rows.resize(periods.size());
  parallel_for(periods.size(), jobs, [&](std::size_t i) {
    EpsProblem prob{model, forcing, kind, dim, periods[i], cell_resolution};
    const FlowSolution fine = solve_eps(prob, cell_opts.solver);
    const CellGrid& grid = fine.u.grid();
    const VectorField f = forcing.sample(grid);
    const FlowSolution hom = solve_homogenized(rep.tensor, f);
    const FlowSolution naive = solve_homogenized(Tensor4::identity(dim, mu_cell.mean()), f);
    ConvergenceRow& row = rep.rows[i];
    row.eps = prob.eps();
    row.err_u = (fine.u - hom.u).l2_norm();
    row.err_p = weighted_pressure_distance(fine.p, hom.p);
    row.err_naive = (fine.u - naive.u).l2_norm();
    row.norm_u = fine.u.l2_norm();
    row.norm_p = fine.p.l2_norm();
    row.max_divergence = max_coefficient(shifted_divergence(fine.u, RealVector::Zero(dim)));
    row.iterations = fine.report.iterations;
    row.solver_residual = fine.report.relative_residual;
  });
  std::vector<double> eps, eu, ep;
  double umin = INFINITY, umax = 0, pmin = INFINITY, pmax = 0;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    eps.push_back(r.eps);
    eu.push_back(r.err_u);
    ep.push_back(r.err_p);
    umin = std::min(umin, r.norm_u);
    umax = std::max(umax, r.norm_u);
    pmin = std::min(pmin, r.norm_p);
    pmax = std::max(pmax, r.norm_p);
    rep.max_divergence = std::max(rep.max_divergence, r.max_divergence);
    if (i > 0 && !(r.err_u < rep.rows[i - 1].err_u)) {
      rep.monotone = false;
      rep.warnings.push_back("velocity error not decreasing at eps " + std::to_string(r.eps));
    }
  }
  bool positive = true;
  for (double v : eu) positive = positive && v > 0.0;
  for (double v : ep) positive = positive && v > 0.0;
  if (positive) {
    rep.slope_u = loglog_slope(eps, eu);
    rep.slope_p = loglog_slope(eps, ep);
  }
  rep.norm_ratio_u = umin > 0.0 ? umax / umin : 1.0;
  rep.norm_ratio_p = pmin > 0.0 ? pmax / pmin : 1.0;
  return rep;
}

}  // namespace stokes_bloch
