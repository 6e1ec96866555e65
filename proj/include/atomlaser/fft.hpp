#pragma once

#include <fftw3.h>

#include <array>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "error.hpp"

namespace atomlaser {

namespace detail {
// FFTW's planner is not re-entrant; execution on distinct arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// In-place unnormalised forward/backward DFT over a 1D or 2D shape.
/// Plans are made once; transform() may be called concurrently on
/// different buffers.
class FourierTransform {
 public:
  FourierTransform(int dimension, std::array<std::size_t, 2> shape)
      : size_(dimension == 1 ? shape[0] : shape[0] * shape[1]) {
    std::vector<std::complex<double>> scratch(size_);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (dimension == 1) {
      const int n = static_cast<int>(shape[0]);
      forward_ = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, flags);
      backward_ = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, flags);
    } else {
      const int n0 = static_cast<int>(shape[0]);
      const int n1 = static_cast<int>(shape[1]);
      forward_ = fftw_plan_dft_2d(n0, n1, buf, buf, FFTW_FORWARD, flags);
      backward_ = fftw_plan_dft_2d(n0, n1, buf, buf, FFTW_BACKWARD, flags);
    }
    if (!forward_ || !backward_) throw Error("FFTW planning failed");
  }

  FourierTransform(const FourierTransform&) = delete;
  FourierTransform& operator=(const FourierTransform&) = delete;

  ~FourierTransform() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (backward_) fftw_destroy_plan(backward_);
  }

  std::size_t size() const { return size_; }

  /// sum_x f(x) exp(-i k x)
  void forward(std::span<std::complex<double>> data) const { run(forward_, data); }
  /// sum_k f(k) exp(+i k x), no 1/N factor.
  void backward(std::span<std::complex<double>> data) const { run(backward_, data); }

 private:
  void run(fftw_plan plan, std::span<std::complex<double>> data) const {
    if (data.size() != size_) throw Error("FFT buffer size mismatch");
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, buf, buf);
  }

  std::size_t size_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace atomlaser
