#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "lirls/error.hpp"
#include "lirls/irls.hpp"
#include "lirls/synthetic.hpp"

using namespace lirls;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("lirls_test_" + name);
  std::filesystem::create_directories(d);
  return d;
}

Image pattern(std::size_t c, std::size_t h, std::size_t w, int shift) {
  Image a(Dims{c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        a.at(ch, y, x) = static_cast<double>((7 * y + 3 * x + 5 * ch + shift) % 17) / 16.0;
  return a;
}

}  // namespace

TEST_CASE("psnr and mse") {
  Image a(Dims{1, 2, 2}, 0.5), b(Dims{1, 2, 2}, 0.5);
  b.at(0, 0, 0) = 0.7;
  CHECK(mse(a, b) == doctest::Approx(0.01));
  CHECK(psnr(a, b).db == doctest::Approx(20.0));
  CHECK(psnr(a, b, 255.0).db == doctest::Approx(20.0 + 20.0 * std::log10(255.0)));
  CHECK(psnr(a, a).infinite);
  CHECK_THROWS_AS(psnr(a, Image(Dims{1, 2, 3})), Error);
}

TEST_CASE("ssim matches scikit-image") {
  // structural_similarity(gaussian_weights=True, sigma=1.5,
  // use_sample_covariance=False, data_range=1) on the same arrays.
  const Image a = pattern(3, 16, 19, 0);
  Image b = a;
  for (std::size_t i = 0; i < b.size(); ++i)
    b.data()[i] = std::clamp(a.data()[i] + 0.1 * std::sin(static_cast<double>(i) * 0.37), 0.0, 1.0);
  CHECK(ssim(a, b) == doctest::Approx(0.97851137553292322).epsilon(1e-12));
  CHECK(ssim(a, a) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ssim(Image(Dims{1, 8, 8}), Image(Dims{1, 8, 8})), Error);
}

TEST_CASE("PFM round-trips bit-exactly in float precision") {
  const auto dir = scratch_dir("pfm");
  for (std::size_t c : {1u, 3u}) {
    Image a = pattern(c, 5, 7, 2);
    a.at(0, 1, 1) = -0.25;
    save_pfm(a, dir / "a.pfm");
    const Image b = load_pfm(dir / "a.pfm");
    CHECK(b.dims() == a.dims());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(b.data()[i] == static_cast<double>(static_cast<float>(a.data()[i])));
  }
  { std::ofstream(dir / "bad.pfm") << "P7\n1 1\n-1\n"; }
  CHECK_THROWS_AS(load_pfm(dir / "bad.pfm"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("PNG round-trips within quantisation") {
  const auto dir = scratch_dir("png");
  const Image a = pattern(3, 6, 9, 1);
  save_png(a, dir / "a16.png", 16);
  save_png(a, dir / "a8.png", 8);
  const Image b16 = load_png(dir / "a16.png"), b8 = load_png(dir / "a8.png");
  CHECK(b16.dims() == a.dims());
  CHECK(testing::max_abs_diff(a.data(), b16.data()) <= 0.5 / 65535.0 + 1e-12);
  CHECK(testing::max_abs_diff(a.data(), b8.data()) <= 0.5 / 255.0 + 1e-12);
  const Image gray = pattern(1, 4, 4, 0);
  save_image(gray, dir / "g.png");
  CHECK(load_image(dir / "g.png").channels() == 1);
  CHECK_THROWS_AS(load_image(dir / "missing.png"), Error);
  CHECK_THROWS_AS(save_image(gray, dir / "g.bmp"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("gaussian kernel matches numpy") {
  const double ref[25] = {
      0.0073323537196344872, 0.02077942342692856, 0.029405609661886843, 0.02077942342692856,
      0.0073323537196344872, 0.02077942342692856, 0.058887562502523631, 0.08333362487070356,
      0.058887562502523631, 0.02077942342692856, 0.029405609661886843, 0.08333362487070356,
      0.1179280095655774, 0.08333362487070356, 0.029405609661886843, 0.02077942342692856,
      0.058887562502523631, 0.08333362487070356, 0.058887562502523631, 0.02077942342692856,
      0.0073323537196344872, 0.02077942342692856, 0.029405609661886843, 0.02077942342692856,
      0.0073323537196344872};
  const Kernel k = gaussian_kernel(5, 1.2);
  for (std::size_t i = 0; i < 25; ++i) CHECK(k.taps[i] == doctest::Approx(ref[i]).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_kernel(4, 1.0), Error);
}

TEST_CASE("synthetic kernels and images are seeded and well formed") {
  for (KernelKind kind : {KernelKind::kGaussian, KernelKind::kMotion}) {
    const Kernel k = synth_kernel(kind, 9, 4);
    CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (double v : k.taps) CHECK(v >= 0.0);
    CHECK(synth_kernel(kind, 9, 4).taps == k.taps);
  }
  const Image a = synthetic_image(Dims{3, 40, 40}, 5);
  CHECK(a.all_finite());
  for (double v : a.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(synthetic_image(Dims{3, 40, 40}, 5).data() == a.data());
  CHECK(synthetic_image(Dims{3, 40, 40}, 6).data() != a.data());
}

TEST_CASE("bicubic upsampling matches a direct Keys interpolation") {
  Image src(Dims{1, 4, 5});
  src.data() = {0.1, 0.4, 0.35, 0.9, 0.2, 0.5, 0.0, 0.7, 0.3, 0.6,
                0.25, 0.8, 0.15, 0.45, 1.0, 0.6, 0.05, 0.55, 0.75, 0.3};
  const Image up = bicubic_upsample(src, 2);
  CHECK(up.dims() == Dims{1, 8, 10});
  const double row1[10] = {0.31562499999999999, 0.20722656250000002, 0.15000000000000002,
                           0.34238281249999997, 0.55937499999999996, 0.61406250000000007,
                           0.59062499999999996, 0.48476562499999998, 0.375, 0.36152343749999999};
  const double row6[10] = {0.59999999999999998, 0.29375000000000001, 0.050000000000000003,
                           0.25312499999999999, 0.55000000000000004, 0.70937499999999998,
                           0.75, 0.53749999999999998, 0.29999999999999999, 0.27187499999999998};
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK(up.at(0, 1, j) == doctest::Approx(row1[j]).epsilon(1e-14));
    CHECK(up.at(0, 6, j) == doctest::Approx(row6[j]).epsilon(1e-14));
  }
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 5; ++x) CHECK(up.at(0, 2 * y, 2 * x) == doctest::Approx(src.at(0, y, x)));
}

TEST_CASE("bilinear demosaick reproduces a constant colour") {
  CfaOperator cfa("RGGB", 10, 12);
  Image gt(Dims{3, 10, 12});
  const double colour[3] = {0.2, 0.55, 0.9};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < gt.dims().plane(); ++i) gt.data()[c * gt.dims().plane() + i] = colour[c];
  const Image mosaic(cfa.output_dims(), cfa.apply(gt.data()));
  const Image rgb = bilinear_demosaick(mosaic, cfa);
  CHECK(testing::max_abs_diff(rgb.data(), gt.data()) < 1e-14);
}

TEST_CASE("pad_replicate copies edges outward") {
  Image y(Dims{1, 2, 2});
  y.data() = {1, 2, 3, 4};
  const Image p = pad_replicate(y, Dims{1, 4, 5}, 1, 2);
  CHECK(p.at(0, 0, 0) == 1.0);
  CHECK(p.at(0, 1, 2) == 1.0);
  CHECK(p.at(0, 2, 3) == 4.0);
  CHECK(p.at(0, 3, 4) == 4.0);
  CHECK(p.at(0, 3, 0) == 3.0);
}

TEST_CASE("Wiener deconvolution inverts a noiseless blur of a smooth image") {
  const Kernel k = gaussian_kernel(5, 1.0);
  Image gt(Dims{1, 36, 36});
  for (std::size_t y = 0; y < 36; ++y)
    for (std::size_t x = 0; x < 36; ++x)
      gt.at(0, y, x) = 0.5 + 0.3 * std::sin(0.3 * static_cast<double>(x)) * std::cos(0.2 * static_cast<double>(y));
  BlurOperator op(k, gt.dims());
  const Image y(op.output_dims(), op.apply(gt.data()));
  const Image est = wiener_deconvolve(pad_replicate(y, gt.dims(), 2, 2), k, 1e-4);
  CHECK(est.dims() == gt.dims());
  // Compare away from the padded border.
  double err = 0.0;
  for (std::size_t r = 8; r < 28; ++r)
    for (std::size_t c = 8; c < 28; ++c) err = std::max(err, std::abs(est.at(0, r, c) - gt.at(0, r, c)));
  CHECK(err < 0.02);
}
