// Regenerates the reconstruction fixtures under tests/data.
//
//   lirls_make_fixtures <dir>
//
// Images are stored as PFM so the acceptance run sees exactly the values
// written here. Baseline reconstructions (Wiener for deblurring, bicubic for
// super-resolution) are stored next to them with their PSNR in
// baselines.json.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "lirls/irls.hpp"
#include "lirls/synthetic.hpp"

using namespace lirls;
namespace fs = std::filesystem;

namespace {

Vec noisy(const Vec& clean, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  Vec y = clean;
  for (double& v : y) v += n(rng);
  return y;
}

Problem observe(OperatorPtr op, const Image& gt, double sigma, std::uint64_t seed) {
  Problem pr;
  pr.forward = std::move(op);
  pr.sigma = sigma;
  const Vec clean = pr.forward->apply(gt.data());
  pr.y = sigma > 0.0 ? noisy(clean, sigma, seed) : clean;
  return pr;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <output-dir>\n", argv[0]);
    return 1;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir);
  nlohmann::json baselines;

  // 64x64 colour deblurring, 9x9 Gaussian blur, 1% noise.
  {
    const Image gt = synthetic_image({3, 64, 64}, 2024);
    const Kernel k = gaussian_kernel(9, 1.6);
    const Problem pr = observe(std::make_shared<BlurOperator>(k, gt.dims()), gt, 0.01, 77);
    const Image y(pr.forward->output_dims(), pr.y);
    const Image wiener = initial_estimate(pr);
    save_pfm(gt, dir / "deblur_gt.pfm");
    save_pfm(y, dir / "deblur_y.pfm");
    save_kernel_text(k, dir / "deblur_kernel.txt");
    save_pfm(wiener, dir / "deblur_wiener.pfm");
    baselines["deblur"] = {{"sigma", 0.01}, {"baseline", "wiener"},
                           {"psnr", psnr(load_pfm(dir / "deblur_wiener.pfm"), gt).db}};
  }

  // x2 super-resolution of a 64x64 image through a 5x5 Gaussian, 1% noise.
  {
    const Image gt = synthetic_image({3, 64, 64}, 2025);
    const Kernel k = gaussian_kernel(5, 1.0);
    const Problem pr = observe(std::make_shared<SrOperator>(k, 2, gt.dims()), gt, 0.01, 78);
    const Image y(pr.forward->output_dims(), pr.y);
    const Image bicubic = naive_estimate(pr);
    save_pfm(gt, dir / "sr_gt.pfm");
    save_pfm(y, dir / "sr_y.pfm");
    save_kernel_text(k, dir / "sr_kernel.txt");
    save_pfm(bicubic, dir / "sr_bicubic.pfm");
    baselines["sr"] = {{"sigma", 0.01}, {"scale", 2}, {"baseline", "bicubic"},
                       {"psnr", psnr(load_pfm(dir / "sr_bicubic.pfm"), gt).db}};
  }

  // Noiseless RGGB mosaic of a constant colour.
  {
    Image gt({3, 64, 64});
    const double colour[3] = {0.8125, 0.375, 0.1875};
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < gt.dims().plane(); ++i) gt.data()[c * gt.dims().plane() + i] = colour[c];
    const Problem pr = observe(std::make_shared<CfaOperator>("RGGB", 64, 64), gt, 0.0, 0);
    save_pfm(gt, dir / "demosaick_gt.pfm");
    save_pfm(Image(pr.forward->output_dims(), pr.y), dir / "demosaick_y.pfm");
    baselines["demosaick"] = {{"sigma", 0.0}, {"cfa", "RGGB"}};
  }

  std::ofstream(dir / "baselines.json") << baselines.dump(2) << "\n";
  std::printf("%s\n", baselines.dump(2).c_str());
  return 0;
}
