#pragma once

#include <complex>
#include <span>

namespace lirls {

// Real 2-D FFT of a fixed H x W grid (FFTW, unnormalised inverse). Plans are
// created under a process-wide lock; execution is thread-safe.
class FftPlan2d {
 public:
  FftPlan2d(std::size_t height, std::size_t width);
  ~FftPlan2d();
  FftPlan2d(const FftPlan2d&) = delete;
  FftPlan2d& operator=(const FftPlan2d&) = delete;

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  // H x (W/2 + 1) half spectrum.
  std::size_t spectrum_size() const { return height_ * (width_ / 2 + 1); }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
  // Destroys nothing in `in`; output scaled by H*W relative to the true inverse.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

 private:
  std::size_t height_, width_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace lirls
