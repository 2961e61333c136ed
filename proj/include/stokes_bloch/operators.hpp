#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stokes_bloch/fft.hpp"
#include "stokes_bloch/field.hpp"
#include "stokes_bloch/grid.hpp"
#include "stokes_bloch/viscosity.hpp"

namespace stokes_bloch {

using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/**
 * @brief Bloch shift eta = delta * direction along a unit direction.
 *
 * The direction is normalized on construction; delta must be nonnegative.
 */
class ShiftParameter {
 public:
  ShiftParameter(RealVector direction, double delta) : direction_(std::move(direction)), delta_(delta) {
    const double norm = direction_.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("shift direction must be nonzero");
    if (delta < 0.0) throw std::invalid_argument("shift magnitude must be nonnegative");
    direction_ /= norm;
  }

  const RealVector& direction() const { return direction_; }
  double delta() const { return delta_; }
  RealVector shift() const { return delta_ * direction_; }

 private:
  RealVector direction_;
  double delta_;
};

/// 2 pi k + theta for the mode at `flat`; trailing entries are zero.
inline std::array<double, 3> shifted_wavevector(const CellGrid& grid, std::size_t flat, const RealVector& theta) {
  const Mode k = grid.mode(flat);
  std::array<double, 3> g{0.0, 0.0, 0.0};
  for (int a = 0; a < grid.dim(); ++a) g[a] = kTwoPi * k[a] + (theta.size() > a ? theta[a] : 0.0);
  return g;
}

inline void check_shift(const CellGrid& grid, const RealVector& theta) {
  if (theta.size() != grid.dim()) throw std::invalid_argument("shift vector has wrong dimension");
}

/// (D(theta) v)_{pq} = d v_q / d y_p + i theta_p v_q.
inline MatrixField shifted_gradient(const VectorField& v, const RealVector& theta) {
  const CellGrid& grid = v.grid();
  check_shift(grid, theta);
  const int d = grid.dim();
  MatrixField out(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto g = shifted_wavevector(grid, j, theta);
    for (int p = 0; p < d; ++p) {
      for (int q = 0; q < d; ++q) out(p * d + q, j) = cplx(0.0, g[p]) * v(q, j);
    }
  }
  return out;
}

/// Gradient of a scalar: (D(theta) s)_p = d s / d y_p + i theta_p s.
inline VectorField shifted_gradient(const ScalarField& s, const RealVector& theta) {
  const CellGrid& grid = s.grid();
  check_shift(grid, theta);
  VectorField out(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto g = shifted_wavevector(grid, j, theta);
    for (int p = 0; p < grid.dim(); ++p) out(p, j) = cplx(0.0, g[p]) * s(0, j);
  }
  return out;
}

/// E(theta) v = (D(theta) v + (D(theta) v)^t) / 2.
inline MatrixField shifted_sym_gradient(const VectorField& v, const RealVector& theta) {
  MatrixField g = shifted_gradient(v, theta);
  const CellGrid& grid = v.grid();
  const int d = grid.dim();
  MatrixField out(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (int p = 0; p < d; ++p) {
      for (int q = 0; q < d; ++q) out(p * d + q, j) = 0.5 * (g(p * d + q, j) + g(q * d + p, j));
    }
  }
  return out;
}

/// D(theta) . v = sum_p (d v_p / d y_p + i theta_p v_p).
inline ScalarField shifted_divergence(const VectorField& v, const RealVector& theta) {
  const CellGrid& grid = v.grid();
  check_shift(grid, theta);
  ScalarField out(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto g = shifted_wavevector(grid, j, theta);
    cplx s{0.0, 0.0};
    for (int p = 0; p < grid.dim(); ++p) s += cplx(0.0, g[p]) * v(p, j);
    out(0, j) = s;
  }
  return out;
}

/// Divergence of a matrix field over its first index:
/// (D(theta) . sigma)_q = sum_p (d/dy_p + i theta_p) sigma_{pq}.
inline VectorField shifted_divergence(const MatrixField& sigma, const RealVector& theta) {
  const CellGrid& grid = sigma.grid();
  check_shift(grid, theta);
  const int d = grid.dim();
  VectorField out(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto g = shifted_wavevector(grid, j, theta);
    for (int q = 0; q < d; ++q) {
      cplx s{0.0, 0.0};
      for (int p = 0; p < d; ++p) s += cplx(0.0, g[p]) * sigma(p * d + q, j);
      out(q, j) = s;
    }
  }
  return out;
}

/**
 * @brief A periodic coefficient prepared for dealiased products.
 *
 * The coefficient is represented by its trigonometric interpolant on the
 * n-grid (Nyquist content split evenly between +n/2 and -n/2) and sampled
 * on the 3/2-padded grid. A product with a field whose modes are active
 * (|k_i| < n/2) is formed nodally on the padded grid and truncated back to
 * active modes, which is alias-free. Pairing the result with a third
 * active-mode field therefore integrates the triple product exactly.
 */
class PaddedCoefficient {
 public:
  explicit PaddedCoefficient(const ScalarField& mu)
      : grid_(mu.grid()), side_(mu.grid().padded_resolution()), mean_(mu.mean().real()) {
    const int d = grid_.dim();
    std::size_t padded_size = 1;
    for (int a = 0; a < d; ++a) padded_size *= static_cast<std::size_t>(side_);
    padded_size_ = padded_size;
    const int half = grid_.resolution() / 2;
    // Interpolant coefficients indexed on a (n+1)^d box of modes -n/2..n/2.
    box_ = grid_.resolution() + 1;
    std::size_t box_size = 1;
    for (int a = 0; a < d; ++a) box_size *= static_cast<std::size_t>(box_);
    hat_.assign(box_size, cplx{0.0, 0.0});
    for (std::size_t b = 0; b < box_size; ++b) {
      Mode m = box_mode(b);
      double w = 1.0;
      for (int a = 0; a < d; ++a) {
        if (std::abs(m[a]) == half) w *= 0.5;
      }
      hat_[b] = w * mu(0, grid_.flat(m));
    }
    std::vector<cplx> padded(padded_size_, cplx{0.0, 0.0});
    for (std::size_t b = 0; b < box_size; ++b) padded[wrapped_index(d, side_, box_mode(b))] += hat_[b];
    nodal_.resize(padded_size_);
    inverse_fft(d, side_, padded, nodal_);
    for (auto& v : nodal_) v = v.real();
  }

  const CellGrid& grid() const { return grid_; }
  int padded_side() const { return side_; }
  std::size_t padded_size() const { return padded_size_; }
  double mean() const { return mean_; }
  /// Real nodal samples of the interpolant on the padded grid.
  const std::vector<cplx>& padded_nodal() const { return nodal_; }

  /// Interpolant coefficient at mode m (zero outside |m_i| <= n/2).
  cplx hat(const Mode& m) const {
    const int half = grid_.resolution() / 2;
    std::size_t b = 0;
    for (int a = 0; a < grid_.dim(); ++a) {
      if (std::abs(m[a]) > half) return cplx{0.0, 0.0};
      b = b * static_cast<std::size_t>(box_) + static_cast<std::size_t>(m[a] + half);
    }
    return hat_[b];
  }

  /// Active-mode coefficients of one component -> padded nodal values.
  void to_padded_nodal(std::span<const cplx> coeffs, std::span<cplx> nodal) const {
    std::vector<cplx> padded(padded_size_, cplx{0.0, 0.0});
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      const Mode k = grid_.mode(j);
      if (!grid_.is_active(k)) continue;
      padded[wrapped_index(grid_.dim(), side_, k)] = coeffs[j];
    }
    inverse_fft(grid_.dim(), side_, padded, nodal);
  }

  /// Padded nodal values -> active-mode coefficients on the cell grid.
  void from_padded_nodal(std::span<const cplx> nodal, std::span<cplx> coeffs) const {
    std::vector<cplx> padded(padded_size_);
    forward_fft(grid_.dim(), side_, nodal, padded);
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      const Mode k = grid_.mode(j);
      coeffs[j] = grid_.is_active(k) ? padded[wrapped_index(grid_.dim(), side_, k)] : cplx{0.0, 0.0};
    }
  }

  /// Dealiased product mu * F, truncated to active modes.
  template <FieldRank R>
  Field<R> multiply(const Field<R>& f) const {
    if (!(f.grid() == grid_)) throw std::invalid_argument("coefficient and field live on different grids");
    Field<R> out(grid_);
    std::vector<cplx> nodal(padded_size_);
    for (std::size_t c = 0; c < f.components(); ++c) {
      to_padded_nodal(f.component(c), nodal);
      for (std::size_t i = 0; i < padded_size_; ++i) nodal[i] *= nodal_[i];
      from_padded_nodal(nodal, out.component(c));
    }
    return out;
  }

 private:
  Mode box_mode(std::size_t b) const {
    Mode m{0, 0, 0};
    const int half = grid_.resolution() / 2;
    for (int a = grid_.dim() - 1; a >= 0; --a) {
      m[a] = static_cast<int>(b % static_cast<std::size_t>(box_)) - half;
      b /= static_cast<std::size_t>(box_);
    }
    return m;
  }

  CellGrid grid_;
  int side_;
  std::size_t padded_size_ = 0;
  int box_ = 0;
  double mean_;
  std::vector<cplx> hat_;
  std::vector<cplx> nodal_;
};

/// Dealiased coefficient product mu * F (3/2 rule), truncated to active modes.
template <FieldRank R>
Field<R> coeff_multiply(const ScalarField& mu, const Field<R>& f) {
  return PaddedCoefficient(mu).multiply(f);
}

/**
 * Galerkin viscous operator v -> -D(theta) . (mu S(theta) v) on active modes,
 * where S is the shifted gradient (full kind) or its symmetric part.
 *
 * Its pairing with any active-mode test field w equals the exact integral
 * of mu S(theta)v : conj(D(theta) w) for the interpolated coefficient.
 */
inline VectorField apply_viscous(const PaddedCoefficient& mu, const VectorField& v, const RealVector& theta,
                                 GradientKind kind) {
  const CellGrid& grid = mu.grid();
  const int d = grid.dim();
  const std::size_t n = grid.size();
  const std::size_t np = mu.padded_size();
  std::vector<std::vector<cplx>> grad(static_cast<std::size_t>(d * d), std::vector<cplx>(np));
  std::vector<cplx> tmp(n);
  std::vector<std::array<double, 3>> g(n);
  for (std::size_t j = 0; j < n; ++j) g[j] = shifted_wavevector(grid, j, theta);
  for (int p = 0; p < d; ++p) {
    for (int q = 0; q < d; ++q) {
      if (kind == GradientKind::symmetrized && q < p) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (kind == GradientKind::full_gradient) {
          tmp[j] = cplx(0.0, g[j][p]) * v(q, j);
        } else {
          tmp[j] = 0.5 * (cplx(0.0, g[j][p]) * v(q, j) + cplx(0.0, g[j][q]) * v(p, j));
        }
      }
      auto& buf = grad[static_cast<std::size_t>(p * d + q)];
      mu.to_padded_nodal(tmp, buf);
      const auto& m = mu.padded_nodal();
      for (std::size_t i = 0; i < np; ++i) buf[i] *= m[i];
    }
  }
  std::vector<std::vector<cplx>> stress(static_cast<std::size_t>(d * d), std::vector<cplx>(n));
  for (int p = 0; p < d; ++p) {
    for (int q = 0; q < d; ++q) {
      if (kind == GradientKind::symmetrized && q < p) continue;
      mu.from_padded_nodal(grad[static_cast<std::size_t>(p * d + q)], stress[static_cast<std::size_t>(p * d + q)]);
    }
  }
  if (kind == GradientKind::symmetrized) {
    for (int p = 0; p < d; ++p) {
      for (int q = 0; q < p; ++q) stress[static_cast<std::size_t>(p * d + q)] = stress[static_cast<std::size_t>(q * d + p)];
    }
  }
  VectorField out(grid);
  for (std::size_t j = 0; j < n; ++j) {
    if (!grid.is_active(j)) continue;
    for (int q = 0; q < d; ++q) {
      cplx s{0.0, 0.0};
      for (int p = 0; p < d; ++p) s += cplx(0.0, -g[j][p]) * stress[static_cast<std::size_t>(p * d + q)][j];
      out(q, j) = s;
    }
  }
  return out;
}

/**
 * Orthogonal projection of each active mode onto the complement of its
 * shifted wavevector 2 pi k + theta. At k = 0 with theta = 0 the mode is
 * left alone; non-active modes are zeroed.
 */
inline void leray_project(VectorField& v, const RealVector& theta) {
  const CellGrid& grid = v.grid();
  const int d = grid.dim();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!grid.is_active(j)) {
      for (int q = 0; q < d; ++q) v(q, j) = 0.0;
      continue;
    }
    const auto g = shifted_wavevector(grid, j, theta);
    double g2 = 0.0;
    for (int p = 0; p < d; ++p) g2 += g[p] * g[p];
    if (g2 == 0.0) continue;
    cplx dot{0.0, 0.0};
    for (int p = 0; p < d; ++p) dot += g[p] * v(p, j);
    for (int p = 0; p < d; ++p) v(p, j) -= dot * (g[p] / g2);
  }
}

}  // namespace stokes_bloch
