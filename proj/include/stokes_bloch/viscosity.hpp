#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "stokes_bloch/field.hpp"
#include "stokes_bloch/grid.hpp"

namespace stokes_bloch {

/// Raised when a sampled viscosity is not bounded below by a positive floor.
class EllipticityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ConstantViscosity {
  double value = 1.0;
};

/// mean + amplitude cos(2 pi frequency y_axis); axis is zero-based.
struct LayeredCosine {
  double mean = 1.0;
  double amplitude = 0.5;
  int axis = 0;
  int frequency = 1;
};

/// mean * prod_i (1 + amplitudes[i] cos(2 pi y_i)).
struct ProductCosine {
  double mean = 1.0;
  std::vector<double> amplitudes;
};

/// Nodal samples on a uniform grid of side n (row-major, last axis fastest).
/// Sampling onto another grid goes through trigonometric interpolation.
struct TabulatedViscosity {
  int dim = 2;
  int n = 0;
  std::vector<double> values;
};

/**
 * @brief Periodic viscosity coefficient mu(y) on the unit cell.
 *
 * The floor mu_0 defaults to the analytic minimum for the cosine families and
 * to the smallest tabulated sample otherwise.
 */
class ViscosityModel {
 public:
  using Variant = std::variant<ConstantViscosity, LayeredCosine, ProductCosine, TabulatedViscosity>;

  explicit ViscosityModel(Variant v, std::optional<double> floor = std::nullopt)
      : variant_(std::move(v)), floor_(floor) {}

  static ViscosityModel constant(double value) { return ViscosityModel(ConstantViscosity{value}); }
  static ViscosityModel layered_cosine(double mean, double amplitude, int axis, int frequency = 1) {
    return ViscosityModel(LayeredCosine{mean, amplitude, axis, frequency});
  }
  static ViscosityModel product_cosine(double mean, std::vector<double> amplitudes) {
    return ViscosityModel(ProductCosine{mean, std::move(amplitudes)});
  }
  static ViscosityModel tabulated(int dim, int n, std::vector<double> values) {
    return ViscosityModel(TabulatedViscosity{dim, n, std::move(values)});
  }

  const Variant& variant() const { return variant_; }

  /// Lower bound mu_0 used for the ellipticity check.
  double floor() const {
    if (floor_) return *floor_;
    return std::visit(
        [](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, ConstantViscosity>) {
            return m.value;
          } else if constexpr (std::is_same_v<T, LayeredCosine>) {
            return m.mean - std::abs(m.amplitude);
          } else if constexpr (std::is_same_v<T, ProductCosine>) {
            double p = m.mean;
            for (double a : m.amplitudes) p *= 1.0 - std::abs(a);
            return p;
          } else {
            if (m.values.empty()) return 0.0;
            return *std::min_element(m.values.begin(), m.values.end());
          }
        },
        variant_);
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&os](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, ConstantViscosity>) {
            os << "constant(" << m.value << ")";
          } else if constexpr (std::is_same_v<T, LayeredCosine>) {
            os << "layered_cosine(mean=" << m.mean << ", amplitude=" << m.amplitude
               << ", axis=" << m.axis + 1 << ", frequency=" << m.frequency << ")";
          } else if constexpr (std::is_same_v<T, ProductCosine>) {
            os << "product_cosine(mean=" << m.mean << ", amplitudes=[";
            for (std::size_t i = 0; i < m.amplitudes.size(); ++i) os << (i ? ", " : "") << m.amplitudes[i];
            os << "])";
          } else {
            os << "tabulated(dim=" << m.dim << ", n=" << m.n << ")";
          }
        },
        variant_);
    return os.str();
  }

 private:
  Variant variant_;
  std::optional<double> floor_;
};

/// A viscosity sampled on a cell grid, with its recorded extrema.
struct SampledViscosity {
  ScalarField field;
  double min = 0.0;
  double max = 0.0;
  double floor = 0.0;

  const CellGrid& grid() const { return field.grid(); }
  /// Cell average M(mu), the zero Fourier coefficient.
  double mean() const { return field.mean().real(); }
};

namespace detail {

inline double evaluate_analytic(const ViscosityModel::Variant& v, const std::array<double, 3>& y, int dim) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantViscosity>) {
          return m.value;
        } else if constexpr (std::is_same_v<T, LayeredCosine>) {
          if (m.axis < 0 || m.axis >= dim) throw std::invalid_argument("layered_cosine axis out of range");
          return m.mean + m.amplitude * std::cos(kTwoPi * m.frequency * y[m.axis]);
        } else if constexpr (std::is_same_v<T, ProductCosine>) {
          if (static_cast<int>(m.amplitudes.size()) != dim) {
            throw std::invalid_argument("product_cosine needs one amplitude per axis");
          }
          double p = m.mean;
          for (int i = 0; i < dim; ++i) p *= 1.0 + m.amplitudes[i] * std::cos(kTwoPi * y[i]);
          return p;
        } else {
          throw std::logic_error("tabulated viscosity is not analytic");
        }
      },
      v);
}

/// Trigonometric interpolant of tabulated samples, evaluated on `grid` at
/// periods*y. Nyquist content is split evenly between +n/2 and -n/2.
inline std::vector<cplx> resample_tabulated(const TabulatedViscosity& t, const CellGrid& grid, int periods) {
  if (t.dim != grid.dim()) throw std::invalid_argument("tabulated viscosity dimension mismatch");
  const CellGrid src(t.dim, t.n);
  if (t.values.size() != src.size()) throw std::invalid_argument("tabulated viscosity has wrong sample count");
  std::vector<cplx> nodal(t.values.begin(), t.values.end());
  std::vector<cplx> coeffs(src.size());
  forward_fft(src.dim(), src.resolution(), nodal, coeffs);
  std::vector<cplx> target(grid.size(), cplx{0.0, 0.0});
  for (std::size_t j = 0; j < src.size(); ++j) {
    Mode k = src.mode(j);
    int nyquist_axes = 0;
    for (int a = 0; a < t.dim; ++a) nyquist_axes += (k[a] == -t.n / 2);
    // Distribute to every sign combination of Nyquist components.
    const int combos = 1 << nyquist_axes;
    const double weight = 1.0 / combos;
    for (int mask = 0; mask < combos; ++mask) {
      Mode km = k;
      int bit = 0;
      for (int a = 0; a < t.dim; ++a) {
        if (k[a] == -t.n / 2) {
          if (mask & (1 << bit)) km[a] = t.n / 2;
          ++bit;
        }
      }
      const Mode scaled{km[0] * periods, km[1] * periods, km[2] * periods};
      bool fits = true;
      for (int a = 0; a < t.dim; ++a) fits = fits && std::abs(scaled[a]) <= grid.resolution() / 2;
      if (!fits) {
        if (std::abs(coeffs[j]) > 1e-14) {
          throw std::invalid_argument("target grid too coarse for tabulated viscosity");
        }
        continue;
      }
      // A target Nyquist slot receives both signs, which alias to one FFT index.
      target[grid.flat(scaled)] += weight * coeffs[j];
    }
  }
  std::vector<cplx> out(grid.size());
  inverse_fft(grid.dim(), grid.resolution(), target, out);
  return out;
}

}  // namespace detail

/**
 * Samples mu(periods * y) at the grid nodes. `periods` > 1 gives the
 * epsilon-scaled coefficient mu(x/eps) with eps = 1/periods.
 *
 * Throws EllipticityError if the sampled minimum is not positive or drops
 * below the model's floor.
 */
inline SampledViscosity sample_viscosity(const ViscosityModel& model, const CellGrid& grid, int periods = 1) {
  if (periods < 1) throw std::invalid_argument("periods must be positive");
  std::vector<cplx> nodal(grid.size());
  if (const auto* tab = std::get_if<TabulatedViscosity>(&model.variant())) {
    nodal = detail::resample_tabulated(*tab, grid, periods);
    for (auto& v : nodal) v = v.real();
  } else {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      auto y = grid.node(j);
      for (auto& c : y) c *= periods;
      nodal[j] = detail::evaluate_analytic(model.variant(), y, grid.dim());
    }
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& v : nodal) {
    lo = std::min(lo, v.real());
    hi = std::max(hi, v.real());
  }
  const double floor = model.floor();
  std::ostringstream why;
  why.precision(17);
  if (!(lo > 0.0) || !(floor > 0.0)) {
    why << "ellipticity violated: sampled minimum " << lo << ", floor " << floor;
    throw EllipticityError(why.str());
  }
  if (lo < floor * (1.0 - 1e-12)) {
    why << "ellipticity violated: sampled minimum " << lo << " below floor " << floor;
    throw EllipticityError(why.str());
  }
  return SampledViscosity{ScalarField::from_nodal(grid, nodal), lo, hi, floor};
}

}  // namespace stokes_bloch
