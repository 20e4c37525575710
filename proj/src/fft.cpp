#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <vector>

#include "lirls/error.hpp"

namespace lirls {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

FftPlan2d::FftPlan2d(std::size_t height, std::size_t width) : height_(height), width_(width) {
  require(height >= 1 && width >= 1, ErrorCode::kDimension, "fft: empty grid");
  const int h = static_cast<int>(height), w = static_cast<int>(width);
  std::vector<double> real(height * width);
  std::vector<std::complex<double>> spec(spectrum_size());
  auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
  // FFTW_UNALIGNED keeps the chosen codelets independent of buffer
  // alignment, so results are bitwise reproducible.
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard<std::mutex> lock(planner_mutex());
  forward_plan_ = fftw_plan_dft_r2c_2d(h, w, real.data(), cplx, flags);
  inverse_plan_ = fftw_plan_dft_c2r_2d(h, w, cplx, real.data(), flags | FFTW_DESTROY_INPUT);
  require(forward_plan_ && inverse_plan_, ErrorCode::kDomain, "fft: planning failed");
}

FftPlan2d::~FftPlan2d() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void FftPlan2d::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
  require(in.size() == height_ * width_ && out.size() == spectrum_size(), ErrorCode::kDimension,
          "fft: forward size mismatch");
  std::vector<double> scratch(in.begin(), in.end());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), scratch.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void FftPlan2d::inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
  require(in.size() == spectrum_size() && out.size() == height_ * width_, ErrorCode::kDimension,
          "fft: inverse size mismatch");
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
}

}  // namespace lirls
