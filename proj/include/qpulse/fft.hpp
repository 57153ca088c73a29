#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>

namespace qpulse {

namespace detail {
// The FFTW planner is not re-entrant; execution of an existing plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// In-place complex FFT of fixed length. Both directions are unnormalized:
/// forward computes sum_j a_j exp(-2 pi i j m / n), backward the conjugate kernel.
/// Plans are created with FFTW_ESTIMATE | FFTW_UNALIGNED, so the plan and its
/// floating-point results depend only on n.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("Fft: zero length");
    std::lock_guard lock(detail::fftw_planner_mutex());
    auto* buf = fftw_alloc_complex(n);
    const int len = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, flags);
    bwd_ = fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, flags);
    fftw_free(buf);
    if (fwd_ == nullptr || bwd_ == nullptr) throw std::runtime_error("Fft: FFTW planning failed");
  }

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  Fft(Fft&& other) noexcept
      : n_(other.n_), fwd_(std::exchange(other.fwd_, nullptr)), bwd_(std::exchange(other.bwd_, nullptr)) {}
  Fft& operator=(Fft&& other) noexcept {
    if (this != &other) {
      release();
      n_ = other.n_;
      fwd_ = std::exchange(other.fwd_, nullptr);
      bwd_ = std::exchange(other.bwd_, nullptr);
    }
    return *this;
  }
  ~Fft() { release(); }

  std::size_t size() const { return n_; }

  void forward(std::span<std::complex<double>> data) const { execute(fwd_, data); }
  void backward(std::span<std::complex<double>> data) const { execute(bwd_, data); }

 private:
  void execute(fftw_plan plan, std::span<std::complex<double>> data) const {
    if (data.size() != n_) throw std::invalid_argument("Fft: length mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
  }

  void release() {
    if (fwd_ == nullptr && bwd_ == nullptr) return;
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (fwd_ != nullptr) fftw_destroy_plan(fwd_);
    if (bwd_ != nullptr) fftw_destroy_plan(bwd_);
    fwd_ = bwd_ = nullptr;
  }

  std::size_t n_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

}  // namespace qpulse
