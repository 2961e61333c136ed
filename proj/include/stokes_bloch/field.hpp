#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "stokes_bloch/fft.hpp"
#include "stokes_bloch/grid.hpp"

namespace stokes_bloch {

enum class FieldRank { scalar = 0, vector = 1, matrix = 2 };

/**
 * @brief Periodic field on the torus stored by its Fourier coefficients.
 *
 * Coefficients are the canonical representation; nodal values are produced
 * on demand. Components are stored contiguously, one block of n^d
 * coefficients per component. A matrix field stores entry (p,q) as
 * component p*d+q.
 */
template <FieldRank Rank>
class Field {
 public:
  explicit Field(const CellGrid& grid)
      : grid_(grid), coeffs_(component_count(grid) * grid.size(), cplx{0.0, 0.0}) {}

  Field(const CellGrid& grid, std::vector<cplx> coeffs) : grid_(grid), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != component_count(grid) * grid.size()) {
      throw std::invalid_argument("field coefficient count does not match grid");
    }
  }

  static std::size_t component_count(const CellGrid& grid) {
    const auto d = static_cast<std::size_t>(grid.dim());
    if constexpr (Rank == FieldRank::scalar) return 1;
    if constexpr (Rank == FieldRank::vector) return d;
    return d * d;
  }

  static Field from_nodal(const CellGrid& grid, std::span<const cplx> nodal) {
    Field f(grid);
    if (nodal.size() != f.coeffs_.size()) {
      throw std::invalid_argument("nodal value count does not match grid");
    }
    const std::size_t n = grid.size();
    for (std::size_t c = 0; c < f.components(); ++c) {
      forward_fft(grid.dim(), grid.resolution(), nodal.subspan(c * n, n),
                  std::span<cplx>(f.coeffs_).subspan(c * n, n));
    }
    return f;
  }

  /// Samples fn(component, y) at every node and transforms.
  static Field from_function(const CellGrid& grid,
                             const std::function<cplx(std::size_t, const std::array<double, 3>&)>& fn) {
    const std::size_t n = grid.size();
    std::vector<cplx> nodal(component_count(grid) * n);
    for (std::size_t c = 0; c < component_count(grid); ++c) {
      for (std::size_t j = 0; j < n; ++j) nodal[c * n + j] = fn(c, grid.node(j));
    }
    return from_nodal(grid, nodal);
  }

  std::vector<cplx> nodal() const {
    std::vector<cplx> out(coeffs_.size());
    const std::size_t n = grid_.size();
    for (std::size_t c = 0; c < components(); ++c) {
      inverse_fft(grid_.dim(), grid_.resolution(), component(c), std::span<cplx>(out).subspan(c * n, n));
    }
    return out;
  }

  const CellGrid& grid() const { return grid_; }
  std::size_t components() const { return component_count(grid_); }

  std::span<const cplx> component(std::size_t c) const {
    return std::span<const cplx>(coeffs_).subspan(c * grid_.size(), grid_.size());
  }
  std::span<cplx> component(std::size_t c) {
    return std::span<cplx>(coeffs_).subspan(c * grid_.size(), grid_.size());
  }

  cplx& operator()(std::size_t c, std::size_t flat) { return coeffs_[c * grid_.size() + flat]; }
  const cplx& operator()(std::size_t c, std::size_t flat) const { return coeffs_[c * grid_.size() + flat]; }

  /// Mean over the torus of one component (its zero Fourier coefficient).
  cplx mean(std::size_t c = 0) const { return coeffs_[c * grid_.size()]; }

  std::span<const cplx> coefficients() const { return coeffs_; }
  std::span<cplx> coefficients() { return coeffs_; }

  /// L2(T^d) norm via Parseval.
  double l2_norm() const {
    double s = 0.0;
    for (const auto& c : coeffs_) s += std::norm(c);
    return std::sqrt(s);
  }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    return *this;
  }
  Field& operator*=(cplx s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(cplx s, Field a) { return a *= s; }

  /// Zeroes the mean of every component.
  void remove_mean() {
    for (std::size_t c = 0; c < components(); ++c) coeffs_[c * grid_.size()] = 0.0;
  }

  /// True if coefficients are conjugate-symmetric (c_{-k} = conj c_k) to tol,
  /// i.e. the nodal values are real. Nyquist modes are ignored.
  bool is_real(double tol = 1e-12) const {
    double scale = 0.0;
    for (const auto& c : coeffs_) scale = std::max(scale, std::abs(c));
    for (std::size_t c = 0; c < components(); ++c) {
      for (std::size_t j = 0; j < grid_.size(); ++j) {
        const Mode k = grid_.mode(j);
        if (!grid_.is_active(k)) continue;
        const Mode mk{-k[0], -k[1], -k[2]};
        const cplx a = (*this)(c, j);
        const cplx b = (*this)(c, grid_.flat(mk));
        if (std::abs(a - std::conj(b)) > tol * std::max(scale, 1.0)) return false;
      }
    }
    return true;
  }

 private:
  void check_same(const Field& o) const {
    if (!(grid_ == o.grid_)) throw std::invalid_argument("fields live on different grids");
  }

  CellGrid grid_;
  std::vector<cplx> coeffs_;
};

using ScalarField = Field<FieldRank::scalar>;
using VectorField = Field<FieldRank::vector>;
using MatrixField = Field<FieldRank::matrix>;

/// Complex L2(T^d) inner product <a, b> = mean of a . conj(b).
template <FieldRank R>
cplx inner(const Field<R>& a, const Field<R>& b) {
  cplx s{0.0, 0.0};
  const auto ca = a.coefficients();
  const auto cb = b.coefficients();
  for (std::size_t i = 0; i < ca.size(); ++i) s += ca[i] * std::conj(cb[i]);
  return s;
}

/// Max-norm of the coefficients.
template <FieldRank R>
double max_coefficient(const Field<R>& f) {
  double m = 0.0;
  for (const auto& c : f.coefficients()) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace stokes_bloch
