#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "dllap/error.hpp"

namespace dllap {

// Real-input FFT of fixed size backed by FFTW.
//
// Plans are created once per size under a global lock (FFTW's planner is not
// re-entrant) and then shared. Execution goes through the new-array interface
// with FFTW_UNALIGNED plans, which is safe to call concurrently on distinct
// buffers. FFTW_ESTIMATE keeps plan selection deterministic.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n < 2 || n % 2 != 0) throw InvalidArgument("RealFft: size must be even and >= 2");
    const auto& p = plans(n);
    forward_ = p.forward;
    inverse_ = p.inverse;
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // time[n] -> spectrum[n/2 + 1], unnormalized.
  void forward(std::span<const double> time, std::span<std::complex<double>> spectrum) const {
    scratch_time_.assign(time.begin(), time.end());
    fftw_execute_dft_r2c(forward_, scratch_time_.data(),
                         reinterpret_cast<fftw_complex*>(spectrum.data()));
  }

  // spectrum[n/2 + 1] -> time[n], scaled by 1/n so inverse(forward(x)) == x.
  void inverse(std::span<const std::complex<double>> spectrum, std::span<double> time) const {
    scratch_spec_.assign(spectrum.begin(), spectrum.end());
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(scratch_spec_.data()),
                         time.data());
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : time) v *= scale;
  }

 private:
  struct PlanPair {
    fftw_plan forward;
    fftw_plan inverse;
  };

  static const PlanPair& plans(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, PlanPair> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> t(n);
    std::vector<std::complex<double>> s(n / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const int len = static_cast<int>(n);
    PlanPair p{
        fftw_plan_dft_r2c_1d(len, t.data(), reinterpret_cast<fftw_complex*>(s.data()), flags),
        fftw_plan_dft_c2r_1d(len, reinterpret_cast<fftw_complex*>(s.data()), t.data(), flags)};
    return cache.emplace(n, p).first->second;
  }

  std::size_t n_;
  fftw_plan forward_;
  fftw_plan inverse_;
  // c2r overwrites its input and r2c wants a mutable pointer.
  mutable std::vector<double> scratch_time_;
  mutable std::vector<std::complex<double>> scratch_spec_;
};

}  // namespace dllap
