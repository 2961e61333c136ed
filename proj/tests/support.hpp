#pragma once

#include <random>

#include "stokes_bloch/stokes_bloch.hpp"

namespace sbt {

using namespace stokes_bloch;

/// Random coefficients on the active modes of a grid.
template <FieldRank R>
Field<R> random_field(const CellGrid& grid, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  Field<R> f(grid);
  for (std::size_t c = 0; c < f.components(); ++c) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (grid.is_active(j)) f(c, j) = cplx(normal(rng), normal(rng));
    }
  }
  return f;
}

inline RealVector unit(double x, double y) {
  RealVector v(2);
  v << x, y;
  return v / v.norm();
}

inline RealVector unit(double x, double y, double z) {
  RealVector v(3);
  v << x, y, z;
  return v / v.norm();
}

/// c/2 (delta_kl delta_ab + delta_kb delta_la): the constant tensor of the symmetrized kind.
inline Tensor4 constant_sym_tensor(int d, double c) {
  Tensor4 t(d);
  t.for_each_index([&](int k, int l, int a, int b) {
    t(k, l, a, b) = 0.5 * c * ((k == l && a == b ? 1.0 : 0.0) + (k == b && l == a ? 1.0 : 0.0));
  });
  return t;
}

inline double max_entry_difference(const Tensor4& a, const Tensor4& b) { return (a - b).max_abs(); }

/// sqrt(m^2 - a^2): harmonic mean of m + a cos(2 pi y).
inline double harmonic_mean_cosine(double m, double a) { return std::sqrt(m * m - a * a); }

}  // namespace sbt
