#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokes_bloch/field.hpp"
#include "stokes_bloch/operators.hpp"

namespace stokes_bloch {

struct SolverOptions {
  /// Relative residual target in the divergence-free projected norm.
  double tolerance = 1e-11;
  int max_iterations = 4000;
};

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  /// Relative residual after each iteration.
  std::vector<double> history;
};

/// Iteration cap reached without meeting the tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, CgReport report) : std::runtime_error(what), report_(std::move(report)) {}
  const CgReport& report() const { return report_; }

 private:
  CgReport report_;
};

namespace detail {

inline double real_inner(const VectorField& a, const VectorField& b) { return inner(a, b).real(); }

/// Scales each mode by 1/(scale * |2 pi k + theta|^2); modes with a
/// zero wavevector are zeroed.
inline void apply_mean_preconditioner(VectorField& r, const RealVector& theta, double scale) {
  const CellGrid& grid = r.grid();
  const int d = grid.dim();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto g = shifted_wavevector(grid, j, theta);
    double g2 = 0.0;
    for (int p = 0; p < d; ++p) g2 += g[p] * g[p];
    const double w = (g2 > 0.0 && grid.is_active(j)) ? 1.0 / (scale * g2) : 0.0;
    for (int p = 0; p < d; ++p) r(static_cast<std::size_t>(p), j) *= w;
  }
}

/// Zeroes modes whose shifted wavevector vanishes.
inline void zero_null_modes(VectorField& v, const RealVector& theta) {
  const CellGrid& grid = v.grid();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto g = shifted_wavevector(grid, j, theta);
    double g2 = 0.0;
    for (int p = 0; p < grid.dim(); ++p) g2 += g[p] * g[p];
    if (g2 == 0.0) {
      for (int p = 0; p < grid.dim(); ++p) v(static_cast<std::size_t>(p), j) = 0.0;
    }
  }
}

}  // namespace detail

/**
 * Preconditioned conjugate gradients for P L(theta) x = P b on the
 * divergence-free active modes, where L is the viscous operator and P the
 * Leray projection. Modes with 2 pi k + theta = 0 are held at zero, so with
 * theta = 0 the solution is mean-zero. The preconditioner is the
 * constant-coefficient operator at mean viscosity.
 *
 * x is overwritten. Throws SolverError if the tolerance is not met.
 */
inline CgReport solve_projected(const PaddedCoefficient& mu, const VectorField& rhs, const RealVector& theta,
                                GradientKind kind, VectorField& x, const SolverOptions& opts = {}) {
  const double scale = mu.mean() * (kind == GradientKind::symmetrized ? 0.5 : 1.0);
  VectorField b = rhs;
  leray_project(b, theta);
  detail::zero_null_modes(b, theta);
  CgReport report;
  const double bnorm = b.l2_norm();
  const double raw = rhs.l2_norm();
  x = VectorField(b.grid());
  // A load that is a gradient up to roundoff has the zero solution.
  if (bnorm <= 1e-14 * raw || bnorm == 0.0) {
    report.converged = true;
    report.relative_residual = raw > 0.0 ? bnorm / raw : 0.0;
    return report;
  }
  auto op = [&](const VectorField& v) {
    VectorField out = apply_viscous(mu, v, theta, kind);
    leray_project(out, theta);
    return out;
  };
  VectorField r = b;
  VectorField z = r;
  detail::apply_mean_preconditioner(z, theta, scale);
  VectorField p = z;
  double rz = detail::real_inner(r, z);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const VectorField Ap = op(p);
    const double alpha = rz / detail::real_inner(p, Ap);
    x += cplx(alpha) * p;
    r -= cplx(alpha) * Ap;
    double rel = r.l2_norm() / bnorm;
    if (rel <= opts.tolerance) {
      // Confirm against the true residual before accepting.
      r = b - op(x);
      rel = r.l2_norm() / bnorm;
    }
    report.iterations = it;
    report.relative_residual = rel;
    report.history.push_back(rel);
    if (rel <= opts.tolerance) {
      report.converged = true;
      return report;
    }
    z = r;
    detail::apply_mean_preconditioner(z, theta, scale);
    const double rz_new = detail::real_inner(r, z);
    p = z + cplx(rz_new / rz) * p;
    rz = rz_new;
  }
  throw SolverError("conjugate gradient did not converge in " + std::to_string(opts.max_iterations) +
                        " iterations (relative residual " + std::to_string(report.relative_residual) + ")",
                    report);
}

/**
 * Pressure whose shifted gradient is the longitudinal part of r:
 * q(m) = -i g . r(m) / |g|^2 with g = 2 pi m + theta; zero where g = 0.
 */
inline ScalarField longitudinal_potential(const VectorField& r, const RealVector& theta) {
  const CellGrid& grid = r.grid();
  ScalarField q(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!grid.is_active(j)) continue;
    const auto g = shifted_wavevector(grid, j, theta);
    double g2 = 0.0;
    cplx dot{0.0, 0.0};
    for (int p = 0; p < grid.dim(); ++p) {
      g2 += g[p] * g[p];
      dot += g[p] * r(static_cast<std::size_t>(p), j);
    }
    if (g2 > 0.0) q(0, j) = cplx(0.0, -1.0) * dot / g2;
  }
  return q;
}

}  // namespace stokes_bloch
