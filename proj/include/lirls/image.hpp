#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lirls {

using Vec = std::vector<double>;

struct Dims {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  std::size_t plane() const { return height * width; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

// c x H x W tensor, planar (channel-major, then row-major).
class Image {
 public:
  Image() = default;
  explicit Image(Dims dims, double fill = 0.0);
  Image(Dims dims, Vec data);

  const Dims& dims() const { return dims_; }
  std::size_t channels() const { return dims_.channels; }
  std::size_t height() const { return dims_.height; }
  std::size_t width() const { return dims_.width; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * dims_.height + y) * dims_.width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * dims_.height + y) * dims_.width + x];
  }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const Vec& data() const { return data_; }
  Vec& data() { return data_; }

  bool all_finite() const;

 private:
  Dims dims_;
  Vec data_;
};

// PSNR result; `infinite` marks bit-identical inputs instead of storing +inf.
struct Psnr {
  double db = 0.0;
  bool infinite = false;
};

struct MetricReport {
  Psnr psnr;
  double ssim = 0.0;
  double peak = 1.0;
};

double mse(const Image& a, const Image& b);
Psnr psnr(const Image& a, const Image& b, double peak = 1.0);
// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// averaged over valid window positions and channels.
double ssim(const Image& a, const Image& b, double peak = 1.0);
MetricReport compare(const Image& a, const Image& b, double peak = 1.0);

// PNG (8/16-bit, gray or RGB) and little-endian PFM.
Image load_image(const std::filesystem::path& path);
// Format chosen from the extension; PNG output is 16-bit, clamped to [0,1].
void save_image(const Image& image, const std::filesystem::path& path);

Image load_pfm(const std::filesystem::path& path);
void save_pfm(const Image& image, const std::filesystem::path& path);
Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path, int bit_depth = 16);

// Planar helpers shared by the operators and tests.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double a, std::span<const double> x, std::span<double> y);

}  // namespace lirls
