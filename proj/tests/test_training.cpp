#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "lirls/error.hpp"
#include "lirls/training.hpp"

using namespace lirls;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.crop = 20;
  c.batch = 2;
  c.epochs = 3;
  c.batches_per_epoch = 2;
  c.validation_samples = 2;
  c.noise_min = 0.005;
  c.noise_max = 0.01;
  c.kernel_size = 3;
  c.forward.max_steps = 200;
  return c;
}

Model small_model() {
  Model m;
  m.bank = FilterBank::zero_mean_random(4, 3, 3, 11);
  m.prior = PriorSpec::fixed(PriorFamily::kSparse, 0.8, 1e-4, 4, 3.0);
  return m;
}

std::vector<Image> small_dataset() {
  std::vector<Image> ds;
  for (std::uint64_t i = 0; i < 4; ++i) ds.push_back(synthetic_image({3, 32, 32}, 50 + i));
  return ds;
}

}  // namespace

TEST_CASE("Adam with AMSGrad matches the update formulas") {
  Vec params = {1.0, -2.0};
  AdamState st;
  const Vec g1 = {0.5, -1.0}, g2 = {-0.1, 0.3};
  adam_amsgrad_step(params, g1, st, 0.1);
  // Step 1: m_hat = g, v_hat = g^2, so the update is lr * sign(g) up to eps.
  CHECK(params[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(params[1] == doctest::Approx(-2.0 + 0.1 * 1.0 / (1.0 + 1e-8)));
  adam_amsgrad_step(params, g2, st, 0.1);
  for (std::size_t i = 0; i < 2; ++i) {
    const double m = 0.9 * (0.1 * g1[i]) + 0.1 * g2[i];
    const double v = 0.999 * (0.001 * g1[i] * g1[i]) + 0.001 * g2[i] * g2[i];
    const double vmax = std::max(0.001 * g1[i] * g1[i], v);
    const double mh = m / (1 - 0.81), vh = vmax / (1 - 0.999 * 0.999);
    const double first = i == 0 ? 1.0 - 0.1 * 0.5 / (0.5 + 1e-8) : -2.0 + 0.1 / (1.0 + 1e-8);
    CHECK(params[i] == doctest::Approx(first - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
  }
  CHECK(st.step == 2);
}

TEST_CASE("moving averages") {
  const Vec v = {5, 4, 6, 3, 2, 1};
  const auto ma = moving_average(v, 3);
  REQUIRE(ma.size() == 4);
  CHECK(ma[0] == doctest::Approx(5.0));
  CHECK(ma[3] == doctest::Approx(2.0));
  CHECK(moving_average_non_increasing(v, 3));
  CHECK_FALSE(moving_average_non_increasing(Vec{1, 1, 1, 5}, 3));
  CHECK(moving_average_non_increasing(Vec{1, 2}, 5));
}

TEST_CASE("parameter packing and weight projection") {
  Model m = small_model();
  m.prior.provider = WeightProvider::kGlobalLearned;
  m.learn_p = true;
  m.p_raw = 0.25;
  const Trainables all{true, true, true};
  Vec flat = pack_parameters(m, all);
  CHECK(flat.size() == m.bank.coeffs().size() + 4 + 1);
  flat.back() = -1.0;
  flat[m.bank.coeffs().size()] = -0.5;
  unpack_parameters(flat, m, all);
  CHECK(m.p_raw == -1.0);
  project_weights(m.prior);
  CHECK(m.prior.weights[0] >= 0.0);

  PriorSpec lr = PriorSpec::fixed(PriorFamily::kLowRank, 1.0, 1e-4, 3);
  lr.weights = {2.0, 1.0, 3.0};
  project_weights(lr);
  CHECK(std::is_sorted(lr.weights.begin(), lr.weights.end()));
}

TEST_CASE("checkpoints round-trip exactly") {
  Checkpoint c = initial_checkpoint(small_model(), small_config());
  c.optimizer.m = testing::gaussian_vec(c.model.bank.coeffs().size(), 1);
  c.optimizer.v = c.optimizer.m;
  c.optimizer.v_max = c.optimizer.m;
  c.optimizer.step = 7;
  c.epoch = 3;
  std::stringstream ss;
  write_checkpoint(c, ss);
  const Checkpoint back = read_checkpoint(ss);
  CHECK(back.model.bank.coeffs() == c.model.bank.coeffs());
  CHECK(back.model.prior.weights == c.model.prior.weights);
  CHECK(back.model.prior.p == c.model.prior.p);
  CHECK(back.optimizer.m == c.optimizer.m);
  CHECK(back.optimizer.step == 7);
  CHECK(back.epoch == 3);
  CHECK(back.rng_state == c.rng_state);
  std::stringstream truncated(ss.str().substr(0, 20));
  CHECK_THROWS_AS(read_checkpoint(truncated), Error);
}

TEST_CASE("samples are seeded") {
  const TrainConfig cfg = small_config();
  const Image img = synthetic_image({3, 32, 32}, 1);
  const DegradationSample a = make_sample(img, cfg, 9), b = make_sample(img, cfg, 9);
  CHECK(a.y == b.y);
  CHECK(a.gt.dims() == Dims{3, 20, 20});
  CHECK(a.sigma >= cfg.noise_min);
  CHECK(a.sigma <= cfg.noise_max);
  CHECK(make_sample(img, cfg, 10).y != a.y);
  TrainConfig sr = cfg;
  sr.task = Task::kSr;
  CHECK(make_sample(img, sr, 3).op->name() == "sr");
  TrainConfig dm = cfg;
  dm.task = Task::kDemosaick;
  CHECK(make_sample(img, dm, 3).op->output_dims().channels == 1);
}

TEST_CASE("default loss margin covers the kernel and filter supports") {
  const TrainConfig cfg = small_config();
  const DegradationSample s = make_sample(synthetic_image({3, 32, 32}, 1), cfg, 2);
  CHECK(loss_margin(cfg, s, small_model().bank) == 2 + 2);
  TrainConfig fixed = cfg;
  fixed.loss_margin = 1;
  CHECK(loss_margin(fixed, s, small_model().bank) == 1);
}

TEST_CASE("training resumes bit-identically") {
  const auto dir = std::filesystem::temp_directory_path() / "lirls_test_resume";
  std::filesystem::remove_all(dir);
  const TrainConfig cfg = small_config();
  const auto ds = small_dataset();
  const Checkpoint start = initial_checkpoint(small_model(), cfg);

  const TrainResult full = train(start, ds, cfg);
  REQUIRE(full.log.size() == 3);

  TrainOptions first;
  first.out_dir = dir;
  first.stop_after_epoch = 1;
  const TrainResult part = train(start, ds, cfg, first);
  CHECK(part.final.epoch == 1);
  const Checkpoint saved = load_checkpoint(dir / "latest.bin");
  CHECK(saved.epoch == 1);
  const TrainResult rest = train(saved, ds, cfg);
  CHECK(rest.final.epoch == 3);
  CHECK(rest.final.model.bank.coeffs() == full.final.model.bank.coeffs());
  CHECK(rest.final.optimizer.v_max == full.final.optimizer.v_max);
  CHECK(rest.log.back().val_psnr == full.log.back().val_psnr);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a raised stop flag interrupts training") {
  std::atomic<bool> stop{true};
  TrainOptions opt;
  opt.stop = &stop;
  try {
    train(initial_checkpoint(small_model(), small_config()), small_dataset(), small_config(), opt);
    FAIL("expected an interruption");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInterrupted);
  }
}

TEST_CASE("config validation") {
  TrainConfig c = small_config();
  c.noise_min = 0.2;
  c.noise_max = 0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(parse_task("sr") == Task::kSr);
  CHECK_THROWS_AS(parse_task("denoise"), Error);
}
