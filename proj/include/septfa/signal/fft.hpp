// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>

#include "septfa/core/error.hpp"

namespace septfa {

using Complex = std::complex<double>;

namespace detail {
// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Real-input FFT of fixed size n (unnormalized forward, 1/n inverse).
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    if (n < 2) throw DomainError("fft size must be >= 2");
    real_ = fftw_alloc_real(static_cast<std::size_t>(n));
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // in: n reals; out: n/2+1 bins.
  void forward(std::span<const double> in, std::span<Complex> out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(forward_);
    for (int k = 0; k < bins(); ++k) out[k] = Complex(spec_[k][0], spec_[k][1]);
  }

  // in: n/2+1 bins; out: n reals, scaled by 1/n. Imaginary parts of the DC
  // and Nyquist bins are ignored.
  void inverse(std::span<const Complex> in, std::span<double> out) {
    for (int k = 0; k < bins(); ++k) {
      spec_[k][0] = in[k].real();
      spec_[k][1] = in[k].imag();
    }
    fftw_execute(inverse_);
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) out[i] = real_[i] * scale;
  }

  /// Per-thread cached instance.
  static RealFft& cached(int n) {
    thread_local std::map<int, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
  }

 private:
  int n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace septfa
