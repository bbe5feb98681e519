#pragma once

#include <vector>

#include <unsupported/Eigen/FFT>

#include "kgpair/core.hpp"

namespace kgpair::detail {

// Grid-aware DFT: maps position samples to ascending-momentum amplitudes
// with the x_0 = -L/2 phase folded in. Not thread-safe; one per thread.
class PeriodicFFT {
 public:
  explicit PeriodicFFT(const Grid& grid)
      : n_(grid.size()), scale_(grid.spacing() / std::sqrt(grid.length())),
        sign_(n_), buf_(n_), out_(n_) {
    fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    for (int a = 0; a < n_; ++a) {
      sign_[a] = ((a - n_ / 2) % 2 == 0) ? 1.0 : -1.0;
    }
  }

  int size() const { return n_; }

  // src and dst may use strides (e.g. one FV component of an interleaved state).
  void forward(const Complex* src, Eigen::Index src_stride, Complex* dst,
               Eigen::Index dst_stride) {
    for (int i = 0; i < n_; ++i) buf_[i] = src[i * src_stride];
    fft_.fwd(out_.data(), buf_.data(), n_);
    for (int a = 0; a < n_; ++a) {
      dst[a * dst_stride] = scale_ * sign_[a] * out_[(a + n_ / 2) % n_];
    }
  }

  void inverse(const Complex* src, Eigen::Index src_stride, Complex* dst,
               Eigen::Index dst_stride) {
    for (int a = 0; a < n_; ++a) {
      buf_[(a + n_ / 2) % n_] = sign_[a] * src[a * src_stride];
    }
    fft_.inv(out_.data(), buf_.data(), n_);
    const double s = 1.0 / (scale_ * n_);
    for (int i = 0; i < n_; ++i) dst[i * dst_stride] = s * out_[i];
  }

 private:
  int n_;
  double scale_;
  std::vector<double> sign_;
  std::vector<Complex> buf_;
  std::vector<Complex> out_;
  Eigen::FFT<double> fft_;
};

}  // namespace kgpair::detail
