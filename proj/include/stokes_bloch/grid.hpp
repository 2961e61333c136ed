#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace stokes_bloch {

using cplx = std::complex<double>;

/// Signed wavenumber tuple; unused trailing entries are zero.
using Mode = std::array<int, 3>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/**
 * @brief Uniform periodic grid on the unit torus (0,1)^d.
 *
 * Nodes sit at y_j = j/n componentwise. Fourier modes use the convention
 * e^{2 pi i k.y}; the flat index of a mode is the FFT index, so mode
 * components run over -n/2 .. n/2-1 and the zero mode has flat index 0.
 * Flat indices are row-major with the last axis fastest, matching FFTW.
 */
class CellGrid {
 public:
  CellGrid(int dim, int n) : dim_(dim), n_(n) {
    if (dim != 2 && dim != 3) {
      throw std::invalid_argument("dimension must be 2 or 3, got " + std::to_string(dim));
    }
    if (n % 2 != 0) {
      throw std::invalid_argument("resolution must be even, got " + std::to_string(n));
    }
    if (n < 4) {
      throw std::invalid_argument("resolution must be at least 4, got " + std::to_string(n));
    }
    size_ = 1;
    for (int i = 0; i < dim; ++i) size_ *= static_cast<std::size_t>(n);
  }

  int dim() const { return dim_; }
  int resolution() const { return n_; }
  /// n^d, the number of nodes (and of modes).
  std::size_t size() const { return size_; }

  std::array<int, 3> shape() const {
    return {n_, n_, dim_ == 3 ? n_ : 1};
  }

  Mode mode(std::size_t flat) const {
    Mode k{0, 0, 0};
    for (int axis = dim_ - 1; axis >= 0; --axis) {
      const int j = static_cast<int>(flat % static_cast<std::size_t>(n_));
      flat /= static_cast<std::size_t>(n_);
      k[axis] = j < n_ / 2 ? j : j - n_;
    }
    return k;
  }

  /// Flat index of a mode; components are wrapped modulo n.
  std::size_t flat(const Mode& k) const {
    std::size_t idx = 0;
    for (int axis = 0; axis < dim_; ++axis) {
      const int j = ((k[axis] % n_) + n_) % n_;
      idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
    }
    return idx;
  }

  /// True if the mode carries unknowns: every |k_i| < n/2 (Nyquist excluded).
  bool is_active(const Mode& k) const {
    for (int axis = 0; axis < dim_; ++axis) {
      if (std::abs(k[axis]) >= n_ / 2) return false;
    }
    return true;
  }
  bool is_active(std::size_t flat_index) const { return is_active(mode(flat_index)); }

  std::array<double, 3> node(std::size_t flat) const {
    std::array<double, 3> y{0.0, 0.0, 0.0};
    for (int axis = dim_ - 1; axis >= 0; --axis) {
      y[axis] = static_cast<double>(flat % static_cast<std::size_t>(n_)) / n_;
      flat /= static_cast<std::size_t>(n_);
    }
    return y;
  }

  /// Side length of the 3/2-rule padded grid used for coefficient products.
  int padded_resolution() const { return 3 * n_ / 2; }

  bool operator==(const CellGrid& other) const = default;

 private:
  int dim_;
  int n_;
  std::size_t size_;
};

inline CellGrid make_grid(int dim, int n) { return CellGrid(dim, n); }

/// Which strain measure the viscous form uses: the full gradient or its
/// symmetric part E(v) = (grad v + grad v^t)/2.
enum class GradientKind { full_gradient, symmetrized };

inline std::string to_string(GradientKind kind) {
  return kind == GradientKind::full_gradient ? "full_gradient" : "symmetrized";
}

inline GradientKind gradient_kind_from_string(const std::string& s) {
  if (s == "full_gradient" || s == "full") return GradientKind::full_gradient;
  if (s == "symmetrized" || s == "sym") return GradientKind::symmetrized;
  throw std::invalid_argument("unknown gradient kind '" + s + "'");
}

}  // namespace stokes_bloch
