#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokes_bloch/field.hpp"
#include "stokes_bloch/galerkin.hpp"
#include "stokes_bloch/operators.hpp"
#include "stokes_bloch/parallel.hpp"
#include "stokes_bloch/solver.hpp"
#include "stokes_bloch/tensor.hpp"
#include "stokes_bloch/viscosity.hpp"

namespace stokes_bloch {

struct CellSolverOptions {
  SolverOptions solver;
  /// Worker cap for the d^2 independent solves (<= 0: all cores).
  int jobs = 1;
  /// Use the dense direct solve instead of conjugate gradients.
  bool dense = false;
};

/**
 * @brief Correctors chi^k_alpha and pressures pi^k_alpha on the torus.
 *
 * Entries are indexed k*d + alpha. The corrector solves
 * -div(mu S(chi + y_alpha e_k)) + grad pi = 0, div chi = 0, with S the full
 * gradient or its symmetric part.
 */
struct CellSolution {
  GradientKind kind = GradientKind::full_gradient;
  std::vector<VectorField> correctors;
  std::vector<ScalarField> pressures;
  std::vector<CgReport> reports;

  int dim() const { return correctors.front().grid().dim(); }
  const VectorField& corrector(int k, int alpha) const { return correctors[static_cast<std::size_t>(k * dim() + alpha)]; }
  const ScalarField& pressure(int k, int alpha) const { return pressures[static_cast<std::size_t>(k * dim() + alpha)]; }
};

/// Strain of the affine field y_alpha e_k: e_alpha (x) e_k, symmetrized for that kind.
inline RealMatrix affine_strain(int dim, int k, int alpha, GradientKind kind) {
  RealMatrix S = RealMatrix::Zero(dim, dim);
  S(alpha, k) += 1.0;
  if (kind == GradientKind::symmetrized) S = 0.5 * (S + S.transpose()).eval();
  return S;
}

/// L(affine): -div(mu S0) for the constant strain S0 of y_alpha e_k.
inline VectorField affine_load(const PaddedCoefficient& mu, int k, int alpha, GradientKind kind) {
  const CellGrid& grid = mu.grid();
  const int d = grid.dim();
  const RealMatrix S = affine_strain(d, k, alpha, kind);
  const RealVector zero = RealVector::Zero(d);
  VectorField out(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!grid.is_active(j)) continue;
    const cplx mh = mu.hat(grid.mode(j));
    const auto g = shifted_wavevector(grid, j, zero);
    for (int q = 0; q < d; ++q) {
      cplx s{0.0, 0.0};
      for (int p = 0; p < d; ++p) s += cplx(0.0, -g[p]) * mh * S(p, q);
      out(static_cast<std::size_t>(q), j) = s;
    }
  }
  return out;
}

namespace detail {

/// Pressure from the momentum residual: grad pi = -(L chi + L affine).
inline ScalarField cell_pressure(const PaddedCoefficient& mu, const VectorField& chi, const VectorField& load,
                                 GradientKind kind) {
  const RealVector zero = RealVector::Zero(mu.grid().dim());
  VectorField r = apply_viscous(mu, chi, zero, kind);
  r += load;
  r *= cplx(-1.0);
  return longitudinal_potential(r, zero);
}

}  // namespace detail

/// Divergence-free projected residual of the cell equation, relative to the load.
inline double cell_residual(const PaddedCoefficient& mu, const VectorField& chi, int k, int alpha, GradientKind kind) {
  const RealVector zero = RealVector::Zero(mu.grid().dim());
  const VectorField load = affine_load(mu, k, alpha, kind);
  VectorField r = apply_viscous(mu, chi, zero, kind) + load;
  leray_project(r, zero);
  VectorField b = load;
  leray_project(b, zero);
  const double bn = b.l2_norm();
  return bn == 0.0 ? r.l2_norm() : r.l2_norm() / bn;
}

/**
 * Solves one cell problem by preconditioned conjugate gradients. Returns the
 * mean-zero divergence-free corrector and the mean-zero pressure.
 */
inline std::pair<VectorField, ScalarField> solve_cell_problem(const PaddedCoefficient& mu, int k, int alpha,
                                                              GradientKind kind, const SolverOptions& opts = {},
                                                              CgReport* report = nullptr) {
  const int d = mu.grid().dim();
  if (k < 0 || k >= d || alpha < 0 || alpha >= d) throw std::out_of_range("cell problem index out of range");
  const RealVector zero = RealVector::Zero(d);
  const VectorField load = affine_load(mu, k, alpha, kind);
  VectorField rhs = load;
  rhs *= cplx(-1.0);
  VectorField chi(mu.grid());
  CgReport rep = solve_projected(mu, rhs, zero, kind, chi, opts);
  if (report) *report = rep;
  return {chi, detail::cell_pressure(mu, chi, load, kind)};
}

/**
 * Dense direct solve of the same Galerkin system in the divergence-free
 * basis (k = 0 excluded). Independent of the FFT operator; meant for small
 * grids.
 */
inline std::pair<VectorField, ScalarField> solve_cell_problem_dense(const PaddedCoefficient& mu, int k, int alpha,
                                                                    GradientKind kind, CgReport* report = nullptr) {
  const CellGrid& grid = mu.grid();
  const int d = grid.dim();
  if (k < 0 || k >= d || alpha < 0 || alpha >= d) throw std::out_of_range("cell problem index out of range");
  RealVector e = RealVector::Zero(d);
  e[0] = 1.0;
  const DivFreeBasis basis = build_divfree_basis(grid, e, 0.0, false);
  const ComplexMatrix H = assemble_shifted_operator(mu, basis, kind);
  const VectorField load = affine_load(mu, k, alpha, kind);
  VectorField rhs = load;
  rhs *= cplx(-1.0);
  const ComplexVector b = basis.from_field(rhs);
  Eigen::LLT<ComplexMatrix> llt(H);
  if (llt.info() != Eigen::Success) throw std::runtime_error("dense cell operator is not positive definite");
  const ComplexVector c = llt.solve(b);
  VectorField chi = basis.to_field(c);
  if (report) {
    report->iterations = 0;
    report->relative_residual = cell_residual(mu, chi, k, alpha, kind);
    report->converged = true;
  }
  return {chi, detail::cell_pressure(mu, chi, load, kind)};
}

/// All d^2 cell problems, solved concurrently up to opts.jobs workers.
inline CellSolution solve_cell_problems(const SampledViscosity& mu, GradientKind kind,
                                        const CellSolverOptions& opts = {}) {
  const PaddedCoefficient pc(mu.field);
  const int d = mu.grid().dim();
  const std::size_t count = static_cast<std::size_t>(d * d);
  CellSolution sol;
  sol.kind = kind;
  sol.correctors.assign(count, VectorField(mu.grid()));
  sol.pressures.assign(count, ScalarField(mu.grid()));
  sol.reports.assign(count, CgReport{});
  parallel_for(count, opts.jobs, [&](std::size_t i) {
    const int k = static_cast<int>(i) / d;
    const int alpha = static_cast<int>(i) % d;
    auto [chi, pi] = opts.dense ? solve_cell_problem_dense(pc, k, alpha, kind, &sol.reports[i])
                                : solve_cell_problem(pc, k, alpha, kind, opts.solver, &sol.reports[i]);
    sol.correctors[i] = std::move(chi);
    sol.pressures[i] = std::move(pi);
  });
  return sol;
}

namespace detail {

/// Padded nodal samples of the total strain S(chi^k_alpha) + S0 for each (k, alpha)
/// and matrix entry (p, q): result[i][p*d+q].
inline std::vector<std::vector<std::vector<cplx>>> total_strains(const PaddedCoefficient& pc, const CellSolution& sol) {
  const CellGrid& grid = pc.grid();
  const int d = grid.dim();
  const RealVector zero = RealVector::Zero(d);
  std::vector<std::vector<std::vector<cplx>>> out(sol.correctors.size());
  for (std::size_t i = 0; i < sol.correctors.size(); ++i) {
    const int k = static_cast<int>(i) / d;
    const int alpha = static_cast<int>(i) % d;
    MatrixField G = sol.kind == GradientKind::symmetrized ? shifted_sym_gradient(sol.correctors[i], zero)
                                                          : shifted_gradient(sol.correctors[i], zero);
    const RealMatrix S0 = affine_strain(d, k, alpha, sol.kind);
    out[i].resize(static_cast<std::size_t>(d * d));
    for (int p = 0; p < d; ++p) {
      for (int q = 0; q < d; ++q) {
        const std::size_t c = static_cast<std::size_t>(p * d + q);
        G(c, 0) += S0(p, q);
        out[i][c].resize(pc.padded_size());
        pc.to_padded_nodal(G.component(c), out[i][c]);
      }
    }
  }
  return out;
}

}  // namespace detail

/**
 * Energy-form tensor: A^{kl}_{alpha beta} = mean of mu S^{k alpha} : S^{l beta},
 * with S^{k alpha} the total strain of chi^k_alpha + y_alpha e_k. Integrals
 * are exact sums on the dealiased padded grid.
 */
inline Tensor4 energy_tensor(const PaddedCoefficient& pc, const CellSolution& sol) {
  const int d = pc.grid().dim();
  const auto strains = detail::total_strains(pc, sol);
  const auto& mu = pc.padded_nodal();
  const double w = 1.0 / static_cast<double>(pc.padded_size());
  Tensor4 A(d);
  for (int k = 0; k < d; ++k) {
    for (int a = 0; a < d; ++a) {
      for (int l = 0; l < d; ++l) {
        for (int b = 0; b < d; ++b) {
          const auto& s1 = strains[static_cast<std::size_t>(k * d + a)];
          const auto& s2 = strains[static_cast<std::size_t>(l * d + b)];
          double sum = 0.0;
          for (std::size_t c = 0; c < s1.size(); ++c) {
            for (std::size_t i = 0; i < pc.padded_size(); ++i) sum += mu[i].real() * (s1[c][i] * std::conj(s2[c][i])).real();
          }
          A(k, l, a, b) = sum * w;
        }
      }
    }
  }
  return A;
}

/**
 * Weak-form tensor: mean of mu S^{k alpha} : S0^{l beta}, which equals the
 * energy form when the corrector solves the cell problem.
 */
inline Tensor4 weak_form_tensor(const PaddedCoefficient& pc, const CellSolution& sol) {
  const int d = pc.grid().dim();
  const auto strains = detail::total_strains(pc, sol);
  const auto& mu = pc.padded_nodal();
  const double w = 1.0 / static_cast<double>(pc.padded_size());
  Tensor4 A(d);
  for (int k = 0; k < d; ++k) {
    for (int a = 0; a < d; ++a) {
      const auto& s1 = strains[static_cast<std::size_t>(k * d + a)];
      for (int l = 0; l < d; ++l) {
        for (int b = 0; b < d; ++b) {
          const RealMatrix S0 = affine_strain(d, l, b, sol.kind);
          double sum = 0.0;
          for (int p = 0; p < d; ++p) {
            for (int q = 0; q < d; ++q) {
              if (S0(p, q) == 0.0) continue;
              const auto& s = s1[static_cast<std::size_t>(p * d + q)];
              for (std::size_t i = 0; i < pc.padded_size(); ++i) sum += S0(p, q) * mu[i].real() * s[i].real();
            }
          }
          A(k, l, a, b) = sum * w;
        }
      }
    }
  }
  return A;
}

/// Homogenized tensor together with the cell solution it came from.
struct Homogenization {
  HomTensor tensor;
  CellSolution cells;
  /// max |energy form - weak form|.
  double weak_form_discrepancy = 0.0;
};

inline Homogenization homogenize(const SampledViscosity& mu, GradientKind kind, const CellSolverOptions& opts = {},
                                 const std::string& model = "") {
  const PaddedCoefficient pc(mu.field);
  Homogenization h;
  h.cells = solve_cell_problems(mu, kind, opts);
  h.tensor.entries = energy_tensor(pc, h.cells);
  h.tensor.kind = kind;
  h.weak_form_discrepancy = (h.tensor.entries - weak_form_tensor(pc, h.cells)).max_abs();
  auto& prov = h.tensor.provenance;
  prov.model = model;
  prov.dim = mu.grid().dim();
  prov.resolution = mu.grid().resolution();
  prov.kind = kind;
  for (const auto& r : h.cells.reports) {
    prov.solver_residuals.push_back(r.relative_residual);
    prov.solver_iterations.push_back(r.iterations);
  }
  return h;
}

inline HomTensor homogenized_tensor(const SampledViscosity& mu, GradientKind kind, const CellSolverOptions& opts = {},
                                    const std::string& model = "") {
  return homogenize(mu, kind, opts, model).tensor;
}

/// max over (k, alpha) of |sum_l A^{kl}_{alpha l} - mean(mu) delta_{k alpha}|.
inline double trace_identity_residual(const Tensor4& A, double mean_mu) {
  const int d = A.dim();
  double m = 0.0;
  for (int k = 0; k < d; ++k) {
    for (int a = 0; a < d; ++a) {
      double s = 0.0;
      for (int l = 0; l < d; ++l) s += A(k, l, a, l);
      m = std::max(m, std::abs(s - (k == a ? mean_mu : 0.0)));
    }
  }
  return m;
}

inline double trace_identity_residual(const HomTensor& A, const SampledViscosity& mu) {
  if (A.kind != GradientKind::full_gradient) {
    throw std::invalid_argument("trace identity applies to full-gradient tensors");
  }
  return trace_identity_residual(A.entries, mu.mean());
}

/// Largest divergence coefficient over all correctors.
inline double max_corrector_divergence(const CellSolution& sol) {
  double m = 0.0;
  for (const auto& chi : sol.correctors) {
    const RealVector zero = RealVector::Zero(chi.grid().dim());
    m = std::max(m, max_coefficient(shifted_divergence(chi, zero)));
  }
  return m;
}

}  // namespace stokes_bloch
