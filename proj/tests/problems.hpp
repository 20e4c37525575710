#pragma once

#include <memory>
#include <random>

#include "lirls/irls.hpp"
#include "lirls/synthetic.hpp"

namespace testing {

struct ProblemSpec {
  lirls::Dims dims{3, 16, 16};
  std::size_t kernel_size = 5;
  lirls::PriorFamily family = lirls::PriorFamily::kSparse;
  double p = 1.0;
  double sigma = 0.01;
  double weight = 1.0;
  std::uint64_t seed = 1;
};

// Seeded deblurring problem over a synthetic image with a matching bank:
// per-channel DCT for sparse priors, single-channel DCT for low-rank ones.
inline lirls::Problem make_deblur_problem(const ProblemSpec& s, lirls::Vec* gt = nullptr) {
  using namespace lirls;
  const Kernel k = synth_kernel(KernelKind::kGaussian, s.kernel_size, s.seed + 1);
  const Image x = synthetic_image(s.dims, s.seed);
  auto op = std::make_shared<BlurOperator>(k, s.dims);
  Problem pr;
  pr.forward = op;
  pr.y = op->apply(x.data());
  std::mt19937_64 rng(s.seed + 2);
  std::normal_distribution<double> noise(0.0, s.sigma);
  for (double& v : pr.y) v += noise(rng);
  pr.sigma = s.sigma;
  const bool lowrank = s.family == PriorFamily::kLowRank;
  pr.bank = std::make_shared<FilterBank>(
      FilterBank::dct(lowrank ? 1 : s.dims.channels, 3, !lowrank && s.dims.channels > 1));
  const std::size_t gd = pr.bank->group_dim(feature_mode(s.family), s.dims.channels);
  pr.prior = PriorSpec::fixed(s.family, s.p, 1e-4,
                              PriorSpec::weight_count(s.family, gd, s.dims.channels), s.weight);
  if (gt) *gt = x.data();
  return pr;
}

}  // namespace testing
