#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokes_bloch/field.hpp"
#include "stokes_bloch/operators.hpp"

namespace stokes_bloch {

using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/**
 * @brief Per-mode orthonormal frames spanning the shifted divergence-free
 * subspace.
 *
 * At an active mode k the d-1 real frame vectors are orthogonal to
 * g = 2 pi k + delta * eta. At k = 0 they are orthogonal to eta for every
 * delta, which encodes eta . mean(phi) = 0 even when delta = 0.
 * Coordinates are ordered mode-major: entry m*(d-1) + a is the weight of
 * frame vector a at modes[m].
 */
struct DivFreeBasis {
  CellGrid grid;
  RealVector direction;
  double delta = 0.0;
  std::vector<std::size_t> modes;
  /// frames[m][a] is frame vector a at modes[m] (trailing entries zero).
  std::vector<std::array<std::array<double, 3>, 2>> frames;

  int per_mode() const { return grid.dim() - 1; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(modes.size()) * per_mode(); }
  RealVector theta() const { return delta * direction; }

  /// Position of the zero mode in `modes`, or -1 if excluded.
  Eigen::Index zero_mode_slot() const {
    for (std::size_t m = 0; m < modes.size(); ++m) {
      if (modes[m] == 0) return static_cast<Eigen::Index>(m);
    }
    return -1;
  }

  VectorField to_field(const ComplexVector& c) const {
    VectorField f(grid);
    const int d = grid.dim();
    for (std::size_t m = 0; m < modes.size(); ++m) {
      for (int a = 0; a < per_mode(); ++a) {
        const cplx w = c[static_cast<Eigen::Index>(m) * per_mode() + a];
        for (int p = 0; p < d; ++p) f(static_cast<std::size_t>(p), modes[m]) += w * frames[m][a][p];
      }
    }
    return f;
  }

  /// Orthogonal projection of a field onto the span of the frames.
  ComplexVector from_field(const VectorField& f) const {
    ComplexVector c(size());
    const int d = grid.dim();
    for (std::size_t m = 0; m < modes.size(); ++m) {
      for (int a = 0; a < per_mode(); ++a) {
        cplx s{0.0, 0.0};
        for (int p = 0; p < d; ++p) s += frames[m][a][p] * f(static_cast<std::size_t>(p), modes[m]);
        c[static_cast<Eigen::Index>(m) * per_mode() + a] = s;
      }
    }
    return c;
  }
};

namespace detail {

/// Frame orthogonal to the unit vector u (2D: rotation by 90 degrees; 3D:
/// Gram-Schmidt from the least-aligned axis, completed by a cross product).
inline std::array<std::array<double, 3>, 2> frame_orthogonal_to(const std::array<double, 3>& u, int dim) {
  std::array<std::array<double, 3>, 2> fr{};
  if (dim == 2) {
    fr[0] = {-u[1], u[0], 0.0};
    return fr;
  }
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(u[i]) < std::abs(u[axis])) axis = i;
  }
  std::array<double, 3> b{0.0, 0.0, 0.0};
  b[axis] = 1.0;
  const double proj = u[axis];
  for (int i = 0; i < 3; ++i) b[i] -= proj * u[i];
  const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  for (auto& v : b) v /= nb;
  fr[0] = b;
  fr[1] = {u[1] * b[2] - u[2] * b[1], u[2] * b[0] - u[0] * b[2], u[0] * b[1] - u[1] * b[0]};
  return fr;
}

}  // namespace detail

/**
 * Builds the divergence-free frames for shift delta * eta. With
 * include_zero_mode = false the k = 0 mode is left out (mean-zero cell
 * problems at delta = 0).
 */
inline DivFreeBasis build_divfree_basis(const CellGrid& grid, const RealVector& eta, double delta,
                                        bool include_zero_mode = true) {
  const ShiftParameter shift(eta, delta);
  DivFreeBasis basis{grid, shift.direction(), delta, {}, {}};
  const int d = grid.dim();
  const RealVector theta = shift.shift();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!grid.is_active(j)) continue;
    if (j == 0 && !include_zero_mode) continue;
    std::array<double, 3> u{0.0, 0.0, 0.0};
    if (j == 0) {
      for (int a = 0; a < d; ++a) u[a] = basis.direction[a];
    } else {
      const auto g = shifted_wavevector(grid, j, theta);
      double n = 0.0;
      for (int a = 0; a < d; ++a) n += g[a] * g[a];
      n = std::sqrt(n);
      for (int a = 0; a < d; ++a) u[a] = g[a] / n;
    }
    basis.modes.push_back(j);
    basis.frames.push_back(detail::frame_orthogonal_to(u, d));
  }
  return basis;
}

/**
 * Dense Hermitian matrix of the viscous form restricted to the basis:
 * H[row, col] = integral of mu S(theta) phi_col : conj(D(theta) phi_row).
 *
 * Entries are assembled directly from the interpolant coefficients of mu,
 * independently of the FFT-based operator.
 */
inline ComplexMatrix assemble_shifted_operator(const PaddedCoefficient& mu, const DivFreeBasis& basis,
                                               GradientKind kind) {
  const CellGrid& grid = basis.grid;
  const int d = grid.dim();
  const int r = basis.per_mode();
  const RealVector theta = basis.theta();
  const std::size_t count = basis.modes.size();
  std::vector<Mode> modes(count);
  std::vector<std::array<double, 3>> g(count);
  for (std::size_t m = 0; m < count; ++m) {
    modes[m] = grid.mode(basis.modes[m]);
    g[m] = shifted_wavevector(grid, basis.modes[m], theta);
  }
  ComplexMatrix H(basis.size(), basis.size());
  for (std::size_t row = 0; row < count; ++row) {
    for (std::size_t col = 0; col < count; ++col) {
      const Mode diff{modes[row][0] - modes[col][0], modes[row][1] - modes[col][1], modes[row][2] - modes[col][2]};
      const cplx mh = mu.hat(diff);
      double gg = 0.0;
      for (int p = 0; p < d; ++p) gg += g[row][p] * g[col][p];
      for (int a = 0; a < r; ++a) {
        const auto& br = basis.frames[row][a];
        double br_gc = 0.0;
        for (int p = 0; p < d; ++p) br_gc += br[p] * g[col][p];
        for (int b = 0; b < r; ++b) {
          const auto& bc = basis.frames[col][b];
          double bb = 0.0;
          for (int p = 0; p < d; ++p) bb += br[p] * bc[p];
          double value = gg * bb;
          if (kind == GradientKind::symmetrized) {
            double gr_bc = 0.0;
            for (int p = 0; p < d; ++p) gr_bc += g[row][p] * bc[p];
            value = 0.5 * (value + br_gc * gr_bc);
          }
          H(static_cast<Eigen::Index>(row) * r + a, static_cast<Eigen::Index>(col) * r + b) = mh * value;
        }
      }
    }
  }
  return H;
}

/// Matrix-free application of the same form through dealiased FFT products.
inline ComplexVector apply_shifted_operator(const PaddedCoefficient& mu, const DivFreeBasis& basis,
                                            const ComplexVector& c, GradientKind kind) {
  return basis.from_field(apply_viscous(mu, basis.to_field(c), basis.theta(), kind));
}

/// Eigenpairs in ascending order.
struct HermitianEigen {
  Eigen::VectorXd values;
  ComplexMatrix vectors;
};

/// Lowest `count` eigenpairs of a dense Hermitian matrix (LAPACK zheevr).
inline HermitianEigen dense_lowest_eigenpairs(const ComplexMatrix& H, int count) {
  const lapack_int n = static_cast<lapack_int>(H.rows());
  count = std::min<int>(count, static_cast<int>(n));
  ComplexMatrix work = H;
  Eigen::VectorXd w(n);
  ComplexMatrix Z(n, count);
  std::vector<lapack_int> support(static_cast<std::size_t>(2 * std::max(count, 1)));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_zheevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'U', n, reinterpret_cast<lapack_complex_double*>(work.data()), n, 0.0, 0.0, 1,
      count, 0.0, &found, w.data(), reinterpret_cast<lapack_complex_double*>(Z.data()), n, support.data());
  if (info != 0 || found != count) {
    throw std::runtime_error("dense Hermitian eigensolver failed (info=" + std::to_string(info) + ")");
  }
  return {w.head(count), Z};
}

/// All eigenvalues of a dense Hermitian matrix, ascending.
inline Eigen::VectorXd dense_all_eigenvalues(const ComplexMatrix& H) {
  const lapack_int n = static_cast<lapack_int>(H.rows());
  ComplexMatrix work = H;
  Eigen::VectorXd w(n);
  const lapack_int info =
      LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'U', n, reinterpret_cast<lapack_complex_double*>(work.data()), n, w.data());
  if (info != 0) throw std::runtime_error("dense Hermitian eigensolver failed");
  return w;
}

struct IterativeEigenOptions {
  double tolerance = 1e-10;
  int max_iterations = 500;
  /// Extra block vectors beyond the requested count.
  int guard = 2;
  std::uint64_t seed = 12345;
};

namespace detail {

/// Orthonormal basis of span(S), dropping numerically dependent directions.
inline ComplexMatrix orthonormalize(ComplexMatrix S) {
  for (Eigen::Index j = 0; j < S.cols(); ++j) {
    const double n = S.col(j).norm();
    if (n > 0.0) S.col(j) /= n;
  }
  Eigen::ColPivHouseholderQR<ComplexMatrix> qr(S);
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  ComplexMatrix Q = qr.householderQ() * ComplexMatrix::Identity(S.rows(), rank);
  return Q;
}

}  // namespace detail

/**
 * Block LOBPCG for the lowest `count` eigenpairs of a Hermitian positive
 * semidefinite operator given matrix-free, with a Hermitian positive
 * preconditioner.
 */
inline HermitianEigen iterative_lowest_eigenpairs(
    Eigen::Index size, int count, const std::function<ComplexVector(const ComplexVector&)>& apply,
    const std::function<ComplexVector(const ComplexVector&)>& precondition, const IterativeEigenOptions& opts = {}) {
  const int block = std::min<int>(count + opts.guard, static_cast<int>(size));
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix X(size, block);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = cplx(normal(rng), normal(rng));
  for (Eigen::Index j = 0; j < block; ++j) X.col(j) = precondition(X.col(j));
  X = detail::orthonormalize(X);
  auto apply_block = [&](const ComplexMatrix& V) {
    ComplexMatrix out(V.rows(), V.cols());
    for (Eigen::Index j = 0; j < V.cols(); ++j) out.col(j) = apply(V.col(j));
    return out;
  };
  ComplexMatrix P(size, 0);
  Eigen::VectorXd lambda;
  for (int it = 0; it < opts.max_iterations; ++it) {
    ComplexMatrix AX = apply_block(X);
    ComplexMatrix small = X.adjoint() * AX;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> rr(0.5 * (small + small.adjoint()));
    X = X * rr.eigenvectors();
    AX = AX * rr.eigenvectors();
    lambda = rr.eigenvalues();
    ComplexMatrix R = AX - X * lambda.asDiagonal();
    double scale = std::max(1.0, std::abs(lambda[block - 1]));
    bool done = true;
    for (int j = 0; j < count; ++j) done = done && R.col(j).norm() <= opts.tolerance * scale;
    if (done) return {lambda.head(count), X.leftCols(count)};
    ComplexMatrix W(size, block);
    for (Eigen::Index j = 0; j < block; ++j) W.col(j) = precondition(R.col(j));
    ComplexMatrix S(size, X.cols() + W.cols() + P.cols());
    S << X, W, P;
    const ComplexMatrix Q = detail::orthonormalize(S);
    const ComplexMatrix AQ = apply_block(Q);
    ComplexMatrix proj = Q.adjoint() * AQ;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> big(0.5 * (proj + proj.adjoint()));
    const ComplexMatrix C = big.eigenvectors().leftCols(block);
    const ComplexMatrix Xnew = Q * C;
    // Search direction: new iterate minus its component along the old X.
    P = Xnew - X * (X.adjoint() * Xnew);
    X = detail::orthonormalize(Xnew);
  }
  throw std::runtime_error("iterative eigensolver did not converge");
}

}  // namespace stokes_bloch
