#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokes_bloch/grid.hpp"

namespace stokes_bloch {

/**
 * @brief Real fourth-order tensor T^{kl}_{alpha beta} in d dimensions.
 *
 * Indices are zero-based and ordered (k, l, alpha, beta) with beta fastest.
 */
class Tensor4 {
 public:
  explicit Tensor4(int dim = 2) : dim_(dim), a_(static_cast<std::size_t>(dim * dim * dim * dim), 0.0) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("tensor dimension must be 2 or 3");
  }

  int dim() const { return dim_; }
  std::size_t size() const { return a_.size(); }

  double& operator()(int k, int l, int alpha, int beta) { return a_[index(k, l, alpha, beta)]; }
  double operator()(int k, int l, int alpha, int beta) const { return a_[index(k, l, alpha, beta)]; }

  std::vector<double>& data() { return a_; }
  const std::vector<double>& data() const { return a_; }

  std::size_t index(int k, int l, int alpha, int beta) const {
    return static_cast<std::size_t>(((k * dim_ + l) * dim_ + alpha) * dim_ + beta);
  }

  /// c delta_{kl} delta_{alpha beta}: the constant-viscosity tensor.
  static Tensor4 identity(int dim, double c = 1.0) {
    Tensor4 t(dim);
    for (int k = 0; k < dim; ++k) {
      for (int a = 0; a < dim; ++a) t(k, k, a, a) = c;
    }
    return t;
  }

  /// I (x) I with entries delta_{alpha k} delta_{beta l}.
  static Tensor4 i_otimes_i(int dim) {
    Tensor4 t(dim);
    for (int k = 0; k < dim; ++k) {
      for (int l = 0; l < dim; ++l) t(k, l, k, l) = 1.0;
    }
    return t;
  }

  Tensor4& operator+=(const Tensor4& o) {
    check(o);
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
  }
  Tensor4& operator-=(const Tensor4& o) {
    check(o);
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
  }
  Tensor4& operator*=(double s) {
    for (auto& v : a_) v *= s;
    return *this;
  }
  friend Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
  friend Tensor4 operator-(Tensor4 a, const Tensor4& b) { return a -= b; }
  friend Tensor4 operator*(double s, Tensor4 a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  /// max |T^{kl}_{ab} - T^{lk}_{ba}|.
  double simple_symmetry_violation() const {
    double m = 0.0;
    for_each_index([&](int k, int l, int a, int b) { m = std::max(m, std::abs((*this)(k, l, a, b) - (*this)(l, k, b, a))); });
    return m;
  }

  /// Largest deviation from T^{kl}_{ab} = T^{al}_{kb} = T^{kb}_{al} = T^{lk}_{ba}.
  double full_symmetry_violation() const {
    double m = 0.0;
    for_each_index([&](int k, int l, int a, int b) {
      const double t = (*this)(k, l, a, b);
      m = std::max({m, std::abs(t - (*this)(a, l, k, b)), std::abs(t - (*this)(k, b, a, l)),
                    std::abs(t - (*this)(l, k, b, a))});
    });
    return m;
  }

  template <typename Fn>
  void for_each_index(Fn&& fn) const {
    for (int k = 0; k < dim_; ++k)
      for (int l = 0; l < dim_; ++l)
        for (int a = 0; a < dim_; ++a)
          for (int b = 0; b < dim_; ++b) fn(k, l, a, b);
  }

 private:
  void check(const Tensor4& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("tensor dimension mismatch");
  }

  int dim_;
  std::vector<double> a_;
};

/// Provenance carried alongside a homogenized tensor.
struct TensorProvenance {
  std::string model;
  int dim = 0;
  int resolution = 0;
  GradientKind kind = GradientKind::full_gradient;
  /// Final relative residual of each cell solve, indexed k*d + alpha.
  std::vector<double> solver_residuals;
  std::vector<int> solver_iterations;
};

/// Homogenized viscosity tensor with its kind and provenance.
struct HomTensor {
  Tensor4 entries;
  GradientKind kind = GradientKind::full_gradient;
  TensorProvenance provenance;
};

}  // namespace stokes_bloch
