#include "lirls/image.hpp"

#include <algorithm>
#include <cmath>

#include "lirls/error.hpp"

namespace lirls {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "dimension error";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kConvergence: return "convergence error";
    case ErrorCode::kMajorizerViolation: return "majorizer violation";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kInterrupted: return "interrupted";
  }
  return "unknown error";
}

std::string to_string(const Dims& d) {
  return std::to_string(d.channels) + "x" + std::to_string(d.height) + "x" +
         std::to_string(d.width);
}

Image::Image(Dims dims, double fill) : dims_(dims), data_(dims.size(), fill) {}

Image::Image(Dims dims, Vec data) : dims_(dims), data_(std::move(data)) {
  require(data_.size() == dims_.size(), ErrorCode::kDimension,
          "image data length " + std::to_string(data_.size()) +
              " does not match " + to_string(dims_));
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double mse(const Image& a, const Image& b) {
  require(a.dims() == b.dims(), ErrorCode::kDimension,
          "mse: shape mismatch " + to_string(a.dims()) + " vs " +
              to_string(b.dims()));
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += static_cast<long double>(d) * d;
  }
  return static_cast<double>(s / static_cast<long double>(a.size()));
}

Psnr psnr(const Image& a, const Image& b, double peak) {
  require(peak > 0.0, ErrorCode::kDomain, "psnr: peak must be positive");
  const double m = mse(a, b);
  if (m == 0.0) return {0.0, true};
  return {10.0 * std::log10(peak * peak / m), false};
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const int r = size / 2;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Separable valid filtering of one plane.
std::vector<double> filter_valid(const double* src, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t k = g.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(h * ow, 0.0), out(oh * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += g[t] * src[y * w + x + t];
      tmp[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += g[t] * tmp[(y + t) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, double peak) {
  require(a.dims() == b.dims(), ErrorCode::kDimension,
          "ssim: shape mismatch " + to_string(a.dims()) + " vs " +
              to_string(b.dims()));
  constexpr int kWindow = 11;
  require(a.height() >= kWindow && a.width() >= kWindow, ErrorCode::kDimension,
          "ssim: image smaller than the 11x11 window");
  const auto g = gaussian_window(kWindow, 1.5);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const std::size_t h = a.height(), w = a.width(), n = h * w;

  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t c = 0; c < a.channels(); ++c) {
    const double* pa = a.data().data() + c * n;
    const double* pb = b.data().data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, h, w, g);
    const auto mu_b = filter_valid(pb, h, w, g);
    const auto s_aa = filter_valid(aa.data(), h, w, g);
    const auto s_bb = filter_valid(bb.data(), h, w, g);
    const auto s_ab = filter_valid(ab.data(), h, w, g);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = s_aa[i] - mu_a[i] * mu_a[i];
      const double vb = s_bb[i] - mu_b[i] * mu_b[i];
      const double cov = s_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
      total += num / den;
      ++count;
    }
  }
  return std::clamp(total / static_cast<double>(count), -1.0, 1.0);
}

MetricReport compare(const Image& a, const Image& b, double peak) {
  return {psnr(a, b, peak), ssim(a, b, peak), peak};
}

}  // namespace lirls
