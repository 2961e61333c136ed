#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokes_bloch/cell_problem.hpp"
#include "stokes_bloch/field.hpp"
#include "stokes_bloch/galerkin.hpp"
#include "stokes_bloch/operators.hpp"
#include "stokes_bloch/parallel.hpp"
#include "stokes_bloch/solver.hpp"

namespace stokes_bloch {

struct BlochOptions {
  /// Largest admissible shift magnitude.
  double delta_max = 0.5;
  /// Dense eigensolve up to this matrix dimension, LOBPCG above.
  Eigen::Index dense_limit = 4096;
  IterativeEigenOptions iterative;
  /// Consecutive eigenvalues closer than this are flagged near-degenerate.
  double degeneracy_gap = 1e-12;
};

/// Lowest eigenpairs of the constrained shifted operator at one shift.
struct BlochEigenpairs {
  std::vector<double> values;
  std::vector<VectorField> fields;
  bool near_degenerate = false;
  bool dense = true;
  /// max |lambda - <L phi, phi>| with L the FFT-based operator.
  double rayleigh_deviation = 0.0;
};

inline void check_delta(double delta, const BlochOptions& opts) {
  if (!(delta >= 0.0)) throw std::invalid_argument("shift magnitude must be nonnegative");
  if (delta > opts.delta_max) {
    throw std::invalid_argument("shift magnitude " + std::to_string(delta) + " exceeds delta_max " +
                                std::to_string(opts.delta_max));
  }
}

/**
 * The `count` smallest eigenvalues (ascending) of the viscous form on the
 * divergence-free subspace with e . mean(phi) = 0, and their L2-normalized
 * eigenfunctions.
 */
inline BlochEigenpairs lowest_branches(const PaddedCoefficient& mu, const RealVector& eta, double delta, int count,
                                       GradientKind kind, const BlochOptions& opts = {}) {
  check_delta(delta, opts);
  const DivFreeBasis basis = build_divfree_basis(mu.grid(), eta, delta);
  if (count < 1 || count > basis.size()) throw std::invalid_argument("invalid eigenpair count");
  HermitianEigen eig;
  BlochEigenpairs out;
  if (basis.size() <= opts.dense_limit) {
    eig = dense_lowest_eigenpairs(assemble_shifted_operator(mu, basis, kind), count);
  } else {
    out.dense = false;
    const double s = kind == GradientKind::symmetrized ? 0.5 : 1.0;
    const RealVector theta = basis.theta();
    Eigen::VectorXd diag(basis.size());
    for (std::size_t m = 0; m < basis.modes.size(); ++m) {
      const auto g = shifted_wavevector(mu.grid(), basis.modes[m], theta);
      double g2 = 0.0;
      for (int p = 0; p < mu.grid().dim(); ++p) g2 += g[p] * g[p];
      for (int a = 0; a < basis.per_mode(); ++a) {
        diag[static_cast<Eigen::Index>(m) * basis.per_mode() + a] = 1.0 / (s * mu.mean() * (g2 + 1.0));
      }
    }
    eig = iterative_lowest_eigenpairs(
        basis.size(), count, [&](const ComplexVector& c) { return apply_shifted_operator(mu, basis, c, kind); },
        [&](const ComplexVector& c) { return ComplexVector(diag.cwiseProduct(c)); }, opts.iterative);
  }
  for (int i = 0; i < count; ++i) {
    const ComplexVector c = eig.vectors.col(i).normalized();
    out.values.push_back(eig.values[i]);
    out.fields.push_back(basis.to_field(c));
    const cplx rq = c.dot(apply_shifted_operator(mu, basis, c, kind));
    out.rayleigh_deviation = std::max(out.rayleigh_deviation, std::abs(rq - eig.values[i]));
    if (i > 0 && out.values[i] - out.values[i - 1] < opts.degeneracy_gap) out.near_degenerate = true;
  }
  return out;
}

/// Eigenpressure and multiplier of an eigenpair.
struct PressureRecovery {
  ScalarField q;
  cplx q0;
  /// Norm of the residual component not representable as -D q - q0 e.
  double transverse_residual = 0.0;
  /// The same restricted to the zero mode.
  double zero_mode_transverse = 0.0;
};

/**
 * Splits r = L phi - lambda phi into -D(delta e) q - q0 e: q from the
 * longitudinal part of each nonzero mode, q0 = -r(0) . e.
 */
inline PressureRecovery recover_pressure(const VectorField& phi, double lambda, const PaddedCoefficient& mu,
                                         const RealVector& eta, double delta, GradientKind kind) {
  const ShiftParameter shift(eta, delta);
  if (!(delta > 0.0)) throw std::invalid_argument("pressure recovery needs a positive shift");
  const RealVector theta = shift.shift();
  const RealVector& e = shift.direction();
  VectorField r = apply_viscous(mu, phi, theta, kind);
  r -= cplx(lambda) * phi;
  const CellGrid& grid = phi.grid();
  const int d = grid.dim();
  PressureRecovery out{ScalarField(grid), cplx{0.0, 0.0}, 0.0, 0.0};
  // -D q = -i g q  =>  q = i g.r / |g|^2 on nonzero modes.
  out.q = longitudinal_potential(r, theta);
  out.q *= cplx(-1.0);
  out.q(0, 0) = 0.0;
  cplx r0e{0.0, 0.0};
  for (int p = 0; p < d; ++p) r0e += e[p] * r(static_cast<std::size_t>(p), 0);
  out.q0 = -r0e;
  VectorField rest = r;
  leray_project(rest, theta);
  double z = 0.0;
  for (int p = 0; p < d; ++p) z += std::norm(rest(static_cast<std::size_t>(p), 0));
  out.zero_mode_transverse = std::sqrt(z);
  out.transverse_residual = rest.l2_norm();
  return out;
}

/// Least-squares fit y ~ c1 x + c2 x^2 + ... + c_p x^p (no intercept).
struct PolynomialFit {
  std::vector<double> coefficients;
  double condition_number = 0.0;
  /// RMS misfit.
  double residual = 0.0;
  bool ill_conditioned = false;
};

inline PolynomialFit fit_pinned_polynomial(const std::vector<double>& x, const std::vector<double>& y, int degree = 4,
                                           double max_condition = 1e10) {
  if (x.size() != y.size()) throw std::invalid_argument("fit data size mismatch");
  if (degree < 2) throw std::invalid_argument("fit degree must be at least 2");
  if (x.size() < static_cast<std::size_t>(degree + 1)) {
    throw std::invalid_argument("derivative fit needs at least " + std::to_string(degree + 1) + " samples");
  }
  const double scale = std::abs(*std::max_element(x.begin(), x.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }));
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  RealMatrix V(n, degree);
  RealVector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = x[static_cast<std::size_t>(i)] / scale;
    double tp = 1.0;
    for (int p = 0; p < degree; ++p) {
      tp *= t;
      V(i, p) = tp;
    }
    rhs[i] = y[static_cast<std::size_t>(i)];
  }
  Eigen::JacobiSVD<RealMatrix> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RealVector sol = svd.solve(rhs);
  PolynomialFit fit;
  const auto& sv = svd.singularValues();
  fit.condition_number = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
  fit.ill_conditioned = !(fit.condition_number <= max_condition);
  fit.residual = (V * sol - rhs).norm() / std::sqrt(static_cast<double>(n));
  for (int p = 0; p < degree; ++p) fit.coefficients.push_back(sol[p] / std::pow(scale, p + 1));
  return fit;
}

/// One tracked sample of one branch.
struct BranchSample {
  double delta = 0.0;
  double lambda = 0.0;
  cplx q0;
  VectorField phi;
  ScalarField q;
  double transverse_residual = 0.0;
  double zero_mode_transverse = 0.0;
  /// |<phi(delta_j), phi(delta_{j-1})>| after matching (1 for the first sample).
  double overlap = 1.0;
};

/**
 * @brief The d-1 bottom branches along direction e over a decreasing
 * shift ladder, matched and phase-aligned, with fitted derivatives at 0.
 */
struct BlochBranch {
  RealVector direction;
  GradientKind kind = GradientKind::full_gradient;
  std::vector<double> deltas;
  /// samples[m][j]: branch m at deltas[j].
  std::vector<std::vector<BranchSample>> samples;
  /// Unit vectors phi0_m orthogonal to the direction.
  std::vector<RealVector> phi0;
  std::vector<PolynomialFit> lambda_fits;
  std::vector<PolynomialFit> q0_fits;
  /// A crossing could not be tracked (overlap below 0.5).
  bool degenerate = false;
  bool near_degenerate = false;
  double max_rayleigh_deviation = 0.0;
  double max_zero_mode_transverse = 0.0;
  double max_imag_q0 = 0.0;
  std::vector<std::string> warnings;

  int count() const { return static_cast<int>(samples.size()); }
  double half_lambda2(int m) const { return lambda_fits.at(static_cast<std::size_t>(m)).coefficients[1]; }
  double lambda1(int m) const { return lambda_fits.at(static_cast<std::size_t>(m)).coefficients[0]; }
  double half_q02(int m) const { return q0_fits.at(static_cast<std::size_t>(m)).coefficients[1]; }
  double q01(int m) const { return q0_fits.at(static_cast<std::size_t>(m)).coefficients[0]; }
};

struct TrackOptions {
  BlochOptions bloch;
  /// Eigenvalues within this relative distance are aligned as one cluster.
  double cluster_tolerance = 1e-8;
  double min_overlap = 0.5;
  int jobs = 1;
};

/// Default shift ladder delta0 * 2^{-j}, j = 0..levels-1.
inline std::vector<double> geometric_ladder(double delta0 = 0.1, int levels = 7) {
  std::vector<double> out;
  for (int j = 0; j < levels; ++j) out.push_back(delta0 * std::ldexp(1.0, -j));
  return out;
}

namespace detail {

/// Zero-mode coefficient vector of a field.
inline Eigen::VectorXcd zero_mode(const VectorField& f) {
  const int d = f.grid().dim();
  Eigen::VectorXcd v(d);
  for (int p = 0; p < d; ++p) v[p] = f(static_cast<std::size_t>(p), 0);
  return v;
}

/// Columns of `cur` rotated unitarily to best match `prev` (Procrustes).
inline std::vector<VectorField> procrustes_align(const std::vector<VectorField>& cur,
                                                 const std::vector<VectorField>& prev) {
  const Eigen::Index k = static_cast<Eigen::Index>(cur.size());
  ComplexMatrix O(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) O(a, b) = inner(cur[static_cast<std::size_t>(b)], prev[static_cast<std::size_t>(a)]);
  }
  // O(a, b) = <cur_b, prev_a>; maximize Re tr(R^H ...) via SVD of O^H.
  Eigen::JacobiSVD<ComplexMatrix> svd(O.adjoint(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const ComplexMatrix R = svd.matrixU() * svd.matrixV().adjoint();
  std::vector<VectorField> out;
  for (Eigen::Index b = 0; b < k; ++b) {
    VectorField f(cur.front().grid());
    for (Eigen::Index a = 0; a < k; ++a) f += R(a, b) * cur[static_cast<std::size_t>(a)];
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace detail

/**
 * Computes the bottom branches over a strictly decreasing positive ladder
 * and matches them across consecutive samples by maximal overlap. The
 * phase of each eigenfunction is fixed so that its zero-mode component has
 * a real positive inner product with the previous sample's; clusters of
 * (near-)equal eigenvalues are aligned by a unitary rotation.
 */
inline BlochBranch track_branches(const PaddedCoefficient& mu, const RealVector& eta,
                                  const std::vector<double>& ladder, GradientKind kind,
                                  const TrackOptions& opts = {}) {
  const int d = mu.grid().dim();
  const int count = d - 1;
  if (ladder.empty()) throw std::invalid_argument("empty shift ladder");
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    if (!(ladder[j] > 0.0)) throw std::invalid_argument("shift ladder entries must be positive");
    if (j > 0 && !(ladder[j] < ladder[j - 1])) throw std::invalid_argument("shift ladder must be strictly decreasing");
    check_delta(ladder[j], opts.bloch);
  }
  const ShiftParameter shift(eta, ladder.front());
  BlochBranch br;
  br.direction = shift.direction();
  br.kind = kind;
  br.deltas = ladder;
  std::vector<BlochEigenpairs> raw(ladder.size());
  parallel_for(ladder.size(), opts.jobs,
               [&](std::size_t j) { raw[j] = lowest_branches(mu, br.direction, ladder[j], count, kind, opts.bloch); });

  br.samples.assign(static_cast<std::size_t>(count), {});
  std::vector<VectorField> prev;
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    auto& eig = raw[j];
    br.near_degenerate = br.near_degenerate || eig.near_degenerate;
    br.max_rayleigh_deviation = std::max(br.max_rayleigh_deviation, eig.rayleigh_deviation);
    std::vector<VectorField> cur = eig.fields;
    std::vector<double> vals = eig.values;
    std::vector<double> overlaps(static_cast<std::size_t>(count), 1.0);
    if (j == 0) {
      // Reference gauge: the largest zero-mode entry is made real positive.
      for (auto& f : cur) {
        const Eigen::VectorXcd z = detail::zero_mode(f);
        Eigen::Index idx = 0;
        z.cwiseAbs().maxCoeff(&idx);
        if (std::abs(z[idx]) > 0.0) f *= std::conj(z[idx]) / std::abs(z[idx]);
      }
    } else {
      // Permutation maximizing total overlap.
      std::vector<int> perm(static_cast<std::size_t>(count));
      std::iota(perm.begin(), perm.end(), 0);
      std::vector<int> best = perm;
      double best_score = -1.0;
      do {
        double s = 0.0;
        for (int m = 0; m < count; ++m) s += std::abs(inner(cur[static_cast<std::size_t>(perm[static_cast<std::size_t>(m)])], prev[static_cast<std::size_t>(m)]));
        if (s > best_score + 1e-14) {
          best_score = s;
          best = perm;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      std::vector<VectorField> permuted;
      std::vector<double> pvals;
      for (int m = 0; m < count; ++m) {
        permuted.push_back(cur[static_cast<std::size_t>(best[static_cast<std::size_t>(m)])]);
        pvals.push_back(vals[static_cast<std::size_t>(best[static_cast<std::size_t>(m)])]);
      }
      cur = std::move(permuted);
      vals = std::move(pvals);
      // Clusters of equal eigenvalues: rotate within the cluster.
      std::vector<bool> done(static_cast<std::size_t>(count), false);
      for (int m = 0; m < count; ++m) {
        if (done[static_cast<std::size_t>(m)]) continue;
        std::vector<int> cluster{m};
        for (int o = m + 1; o < count; ++o) {
          const double scale = std::max(std::abs(vals[static_cast<std::size_t>(m)]), std::abs(vals[static_cast<std::size_t>(o)]));
          if (std::abs(vals[static_cast<std::size_t>(m)] - vals[static_cast<std::size_t>(o)]) <= opts.cluster_tolerance * scale) {
            cluster.push_back(o);
          }
        }
        for (int c : cluster) done[static_cast<std::size_t>(c)] = true;
        if (cluster.size() < 2) continue;
        std::vector<VectorField> cf, pf;
        for (int c : cluster) {
          cf.push_back(cur[static_cast<std::size_t>(c)]);
          pf.push_back(prev[static_cast<std::size_t>(c)]);
        }
        auto aligned = detail::procrustes_align(cf, pf);
        double mean_val = 0.0;
        for (int c : cluster) mean_val += vals[static_cast<std::size_t>(c)];
        mean_val /= static_cast<double>(cluster.size());
        for (std::size_t c = 0; c < cluster.size(); ++c) {
          cur[static_cast<std::size_t>(cluster[c])] = std::move(aligned[c]);
          vals[static_cast<std::size_t>(cluster[c])] = mean_val;
        }
      }
      for (int m = 0; m < count; ++m) {
        auto& f = cur[static_cast<std::size_t>(m)];
        const cplx s = detail::zero_mode(prev[static_cast<std::size_t>(m)]).dot(detail::zero_mode(f));
        if (std::abs(s) > 0.0) f *= std::conj(s) / std::abs(s);
        overlaps[static_cast<std::size_t>(m)] = std::abs(inner(f, prev[static_cast<std::size_t>(m)]));
        if (overlaps[static_cast<std::size_t>(m)] < opts.min_overlap) {
          br.degenerate = true;
          br.warnings.push_back("branch " + std::to_string(m + 1) + " overlap " +
                                std::to_string(overlaps[static_cast<std::size_t>(m)]) + " below " +
                                std::to_string(opts.min_overlap) + " at delta " + std::to_string(ladder[j]));
        }
      }
    }
    for (int m = 0; m < count; ++m) {
      const auto& f = cur[static_cast<std::size_t>(m)];
      const double lam = vals[static_cast<std::size_t>(m)];
      PressureRecovery pr = recover_pressure(f, lam, mu, br.direction, ladder[j], kind);
      br.max_zero_mode_transverse = std::max(br.max_zero_mode_transverse, pr.zero_mode_transverse);
      br.max_imag_q0 = std::max(br.max_imag_q0, std::abs(pr.q0.imag()));
      br.samples[static_cast<std::size_t>(m)].push_back(BranchSample{ladder[j], lam, pr.q0, f, std::move(pr.q),
                                                                     pr.transverse_residual, pr.zero_mode_transverse,
                                                                     overlaps[static_cast<std::size_t>(m)]});
    }
    prev = std::move(cur);
  }
  return br;
}

/**
 * Fits lambda(delta) and Re q0(delta) by c1 delta + ... + c_p delta^p
 * (p = degree) and extracts phi0: the real part of the zero-mode component, extrapolated
 * from the two smallest shifts, made orthogonal to the direction and
 * orthonormalized across branches.
 */
inline void fit_derivatives(BlochBranch& br, int degree = 4) {
  br.lambda_fits.clear();
  br.q0_fits.clear();
  br.phi0.clear();
  for (int m = 0; m < br.count(); ++m) {
    const auto& s = br.samples[static_cast<std::size_t>(m)];
    std::vector<double> x, lam, q0;
    for (const auto& smp : s) {
      x.push_back(smp.delta);
      lam.push_back(smp.lambda);
      q0.push_back(smp.q0.real());
    }
    br.lambda_fits.push_back(fit_pinned_polynomial(x, lam, degree));
    br.q0_fits.push_back(fit_pinned_polynomial(x, q0, degree));
    if (br.lambda_fits.back().ill_conditioned || br.q0_fits.back().ill_conditioned) {
      br.warnings.push_back("ill-conditioned derivative fit for branch " + std::to_string(m + 1));
    }
    const std::size_t last = s.size() - 1;
    RealVector v = detail::zero_mode(s[last].phi).real();
    if (s.size() >= 2 && std::abs(s[last - 1].delta - 2.0 * s[last].delta) <= 1e-12 * s[last].delta) {
      const RealVector w = detail::zero_mode(s[last - 1].phi).real();
      v = 2.0 * v / v.norm() - w / w.norm();
    }
    v -= v.dot(br.direction) * br.direction;
    for (const auto& u : br.phi0) v -= v.dot(u) * u;
    if (!(v.norm() > 0.0)) throw std::runtime_error("limit eigenvector vanished");
    br.phi0.push_back(v / v.norm());
  }
}

/// Comparison of finite-difference derivatives with the corrector prediction.
struct DerivativeCheck {
  int branch = 0;
  double delta = 0.0;
  bool central = false;
  /// Relative L2 mismatch of the mean-zero parts.
  double phi_residual = 0.0;
  double q_residual = 0.0;
  /// Zero-mode part of the computed phi' (the constant zeta).
  Eigen::VectorXcd zeta;
  /// Imaginary part of <phi(delta)(0), phi0> relative to its modulus.
  double phase_drift = 0.0;
  /// Predicted fields i e_alpha chi^r_alpha phi0_r and i e_alpha pi^r_alpha phi0_r.
  VectorField predicted_phi;
  ScalarField predicted_q;
};

namespace detail {

/// Sample at +delta (and optionally -delta), gauged against phi0.
struct GaugedSample {
  VectorField phi;
  ScalarField q;
  double drift = 0.0;
};

inline GaugedSample gauged_sample(const PaddedCoefficient& mu, const RealVector& eta, double delta,
                                  const RealVector& phi0, GradientKind kind, const BlochOptions& opts) {
  const int d = mu.grid().dim();
  BlochEigenpairs eig = lowest_branches(mu, eta, delta, d - 1, kind, opts);
  // Pick the eigenfunction whose zero mode best matches phi0.
  int best = 0;
  double best_ov = -1.0;
  for (int m = 0; m < d - 1; ++m) {
    const double ov = std::abs(zero_mode(eig.fields[static_cast<std::size_t>(m)]).dot(phi0.cast<cplx>()));
    if (ov > best_ov) {
      best_ov = ov;
      best = m;
    }
  }
  VectorField f = eig.fields[static_cast<std::size_t>(best)];
  const cplx s = phi0.cast<cplx>().dot(zero_mode(f));
  GaugedSample out{f, ScalarField(mu.grid()), 0.0};
  if (std::abs(s) > 0.0) out.phi *= std::conj(s) / std::abs(s);
  PressureRecovery pr = recover_pressure(out.phi, eig.values[static_cast<std::size_t>(best)], mu, eta, delta, kind);
  out.q = std::move(pr.q);
  return out;
}

}  // namespace detail

/**
 * Checks phi'(y;0) = i e_alpha chi^r_alpha(y) phi0_r + zeta and
 * q'(y;0) = i e_alpha pi^r_alpha(y) phi0_r on their mean-zero parts.
 * With central = false the derivative is (phi(delta) - phi0)/delta; with
 * central = true it is (phi(delta) - phi(-delta))/(2 delta), where the
 * negative shift is realized along -e.
 */
inline DerivativeCheck check_first_order_eigenfunction(const PaddedCoefficient& mu, const RealVector& eta,
                                                       const RealVector& phi0, const CellSolution& cells,
                                                       double delta, bool central = false, int branch = 0,
                                                       const BlochOptions& opts = {}) {
  const CellGrid& grid = mu.grid();
  const int d = grid.dim();
  const RealVector e = eta / eta.norm();
  DerivativeCheck chk{branch, delta, central, 0.0, 0.0, {}, 0.0, VectorField(grid), ScalarField(grid)};
  for (int r = 0; r < d; ++r) {
    for (int a = 0; a < d; ++a) {
      const cplx w = cplx(0.0, e[a] * phi0[r]);
      chk.predicted_phi += w * cells.corrector(r, a);
      chk.predicted_q += w * cells.pressure(r, a);
    }
  }
  detail::GaugedSample plus = detail::gauged_sample(mu, e, delta, phi0, cells.kind, opts);
  VectorField dphi = plus.phi;
  ScalarField dq = plus.q;
  if (central) {
    // phi at shift -delta e is the eigenfunction for direction -e.
    detail::GaugedSample minus = detail::gauged_sample(mu, -e, delta, phi0, cells.kind, opts);
    dphi -= minus.phi;
    dq -= minus.q;
    dphi *= cplx(1.0 / (2.0 * delta));
    dq *= cplx(1.0 / (2.0 * delta));
  } else {
    for (int p = 0; p < d; ++p) dphi(static_cast<std::size_t>(p), 0) -= phi0[p];
    dphi *= cplx(1.0 / delta);
    dq *= cplx(1.0 / delta);
  }
  chk.zeta = detail::zero_mode(dphi);
  const cplx s = phi0.cast<cplx>().dot(detail::zero_mode(plus.phi));
  chk.phase_drift = std::abs(s) > 0.0 ? std::abs(s.imag()) / std::abs(s) : 0.0;
  dphi.remove_mean();
  dq.remove_mean();
  VectorField pphi = chk.predicted_phi;
  pphi.remove_mean();
  ScalarField pq = chk.predicted_q;
  pq.remove_mean();
  const double nphi = pphi.l2_norm();
  const double nq = pq.l2_norm();
  chk.phi_residual = (dphi - pphi).l2_norm() / (nphi > 0.0 ? nphi : 1.0);
  chk.q_residual = (dq - pq).l2_norm() / (nq > 0.0 ? nq : 1.0);
  return chk;
}

}  // namespace stokes_bloch
