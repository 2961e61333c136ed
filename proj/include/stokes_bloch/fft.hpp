#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "stokes_bloch/grid.hpp"

namespace stokes_bloch {

namespace detail {

/// Process-wide cache of FFTW plans keyed by (dim, side, sign).
///
/// FFTW's planner is not re-entrant, so lookups and creation are serialized.
/// Plans are built with FFTW_UNALIGNED and executed through the new-array
/// interface, which is safe to call concurrently.
class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  fftw_plan get(int dim, int side, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(dim, side, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::size_t total = 1;
    int dims[3] = {side, side, side};
    for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(side);
    std::vector<std::complex<double>> in(total), out(total);
    fftw_plan plan = fftw_plan_dft(dim, dims, reinterpret_cast<fftw_complex*>(in.data()),
                                   reinterpret_cast<fftw_complex*>(out.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  FftPlanCache(const FftPlanCache&) = delete;
  FftPlanCache& operator=(const FftPlanCache&) = delete;

 private:
  FftPlanCache() = default;
  ~FftPlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

}  // namespace detail

/// Nodal values -> Fourier coefficients, normalized so that
/// f(y) = sum_k c_k e^{2 pi i k.y} (the zero coefficient is the mean).
inline void forward_fft(int dim, int side, std::span<const cplx> nodal, std::span<cplx> coeffs) {
  fftw_plan plan = detail::FftPlanCache::instance().get(dim, side, FFTW_FORWARD);
  // Out-of-place complex transforms leave the input untouched.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(nodal.data())),
                   reinterpret_cast<fftw_complex*>(coeffs.data()));
  const double scale = 1.0 / static_cast<double>(coeffs.size());
  for (auto& c : coeffs) c *= scale;
}

/// Fourier coefficients -> nodal values (unnormalized inverse).
inline void inverse_fft(int dim, int side, std::span<const cplx> coeffs, std::span<cplx> nodal) {
  fftw_plan plan = detail::FftPlanCache::instance().get(dim, side, FFTW_BACKWARD);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(coeffs.data())),
                   reinterpret_cast<fftw_complex*>(nodal.data()));
}

/// Flat index of a signed mode on a cubic grid of given side.
inline std::size_t wrapped_index(int dim, int side, const Mode& k) {
  std::size_t idx = 0;
  for (int axis = 0; axis < dim; ++axis) {
    const int j = ((k[axis] % side) + side) % side;
    idx = idx * static_cast<std::size_t>(side) + static_cast<std::size_t>(j);
  }
  return idx;
}

}  // namespace stokes_bloch
