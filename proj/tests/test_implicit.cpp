#include "doctest.h"
#include "helpers.hpp"
#include "lirls/error.hpp"
#include "lirls/implicit_grad.hpp"
#include "problems.hpp"

using namespace lirls;
using testing::gaussian_vec;

namespace {

IrlsLimits tight_limits() {
  IrlsLimits lim = IrlsLimits::training();
  lim.tolerance = 1e-11;
  lim.max_steps = 3000;
  lim.inner = SolveConfig{500, 1e-12, {}};
  lim.strict = false;
  return lim;
}

// Small 1-channel problem with a learnable 2-filter bank.
Problem tiny_problem(double p, Vec* gt) {
  testing::ProblemSpec s;
  s.dims = {1, 14, 14};
  s.kernel_size = 3;
  s.p = p;
  s.sigma = 0.02;
  Problem pr = testing::make_deblur_problem(s, gt);
  pr.bank = std::make_shared<FilterBank>(FilterBank::zero_mean_random(2, 1, 3, 4));
  pr.prior = PriorSpec::fixed(PriorFamily::kSparse, p, 1e-2, 2, 3.0);
  pr.prior.provider = WeightProvider::kGlobalLearned;
  pr.prior.weights = {2.0, 3.5};
  return pr;
}

}  // namespace

TEST_CASE("fixed-point Jacobian matches differences of g") {
  for (double p : {1.0, 0.7}) {
    testing::ProblemSpec s;
    s.dims = {3, 10, 10};
    s.p = p;
    const Problem pr = testing::make_deblur_problem(s);
    const IrlsState st = irls_solve(pr, initial_estimate(pr).data(), IrlsLimits::training());
    const FixedPointResidual r(pr, st.x);
    CHECK(r.convex() == (p == 1.0));
    const Vec v = gaussian_vec(st.x.size(), 2);
    Vec jv(v.size());
    r.jacobian_apply(v, jv);
    const double h = 1e-6;
    Vec xp = st.x, xm = st.x;
    axpy(h, v, xp);
    axpy(-h, v, xm);
    const Vec gp = fixed_point_map(pr, xp), gm = fixed_point_map(pr, xm);
    Vec fd(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) fd[i] = (gp[i] - gm[i]) / (2 * h);
    Vec diff(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) diff[i] = fd[i] - jv[i];
    CHECK(norm2(diff) <= 1e-5 * norm2(fd));
  }
}

TEST_CASE("unconverged points are rejected") {
  testing::ProblemSpec s;
  s.dims = {1, 10, 10};
  const Problem pr = testing::make_deblur_problem(s);
  CHECK_THROWS_AS(FixedPointResidual(pr, Vec(pr.x_dims().size(), 0.0)), Error);
}

TEST_CASE("vjp matches differences of v^T g in every parameter") {
  Vec gt;
  const Problem pr = tiny_problem(0.8, &gt);
  const IrlsState st = irls_solve(pr, initial_estimate(pr).data(), IrlsLimits::training());
  const FixedPointResidual r(pr, st.x);
  const Vec v = gaussian_vec(st.x.size(), 5);
  const GradientBundle b = vjp_raw(r, v, Trainables{true, true, true});
  const GradientBundle neg = vjp_theta(r, v, Trainables{true, true, true});
  CHECK(neg.d_p == -b.d_p);

  auto pairing = [&](const Problem& q) { return dot(v, fixed_point_map(q, st.x)); };
  const double h = 1e-6;
  for (std::size_t i = 0; i < pr.bank->coeffs().size(); ++i) {
    Problem qp = pr, qm = pr;
    auto bp = std::make_shared<FilterBank>(*pr.bank), bm = std::make_shared<FilterBank>(*pr.bank);
    bp->coeffs()[i] += h;
    bm->coeffs()[i] -= h;
    qp.bank = bp;
    qm.bank = bm;
    const double fd = (pairing(qp) - pairing(qm)) / (2 * h);
    CHECK(std::abs(b.d_filters[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
  for (std::size_t j = 0; j < 2; ++j) {
    Problem qp = pr, qm = pr;
    qp.prior.weights[j] += h;
    qm.prior.weights[j] -= h;
    const double fd = (pairing(qp) - pairing(qm)) / (2 * h);
    CHECK(std::abs(b.d_weights[j] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
  Problem qp = pr, qm = pr;
  qp.prior.p += h;
  qm.prior.p -= h;
  const double fd = (pairing(qp) - pairing(qm)) / (2 * h);
  CHECK(std::abs(b.d_p - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));

  const GradientBundle only_w = vjp_raw(r, v, Trainables{false, true, false});
  for (double e : only_w.d_filters) CHECK(e == 0.0);
  CHECK(only_w.d_p == 0.0);
}

TEST_CASE("implicit loss gradient matches re-solving") {
  Vec gt;
  for (double p : {1.0, 0.8}) {
    CAPTURE(p);
    const Problem pr = tiny_problem(p, &gt);
    const Dims d = pr.x_dims();
    const std::size_t margin = 2;
    auto solve = [&](const Problem& q) { return irls_solve(q, initial_estimate(q).data(), tight_limits()).x; };
    auto loss = [&](const Problem& q) { return negative_psnr_loss(solve(q), gt, d, margin).loss; };
    const Vec xs = solve(pr);
    const LossValue lv = negative_psnr_loss(xs, gt, d, margin);
    SolveConfig cfg{5000, 1e-10, {}, 1e-12};
    const GradientBundle g = implicit_loss_grad(pr, xs, lv.grad, Trainables{true, true, false}, cfg);
    const double h = 1e-5;
    for (std::size_t i : {0u, 4u, 8u, 13u}) {
      Problem qp = pr, qm = pr;
      auto bp = std::make_shared<FilterBank>(*pr.bank), bm = std::make_shared<FilterBank>(*pr.bank);
      bp->coeffs()[i] += h;
      bm->coeffs()[i] -= h;
      qp.bank = bp;
      qm.bank = bm;
      const double fd = (loss(qp) - loss(qm)) / (2 * h);
      CHECK(std::abs(g.d_filters[i] - fd) <= 1e-3 * std::max(1.0, std::abs(fd)));
    }
    Problem qp = pr, qm = pr;
    qp.prior.weights[1] += h;
    qm.prior.weights[1] -= h;
    const double fd = (loss(qp) - loss(qm)) / (2 * h);
    CHECK(std::abs(g.d_weights[1] - fd) <= 1e-3 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("losses") {
  const Vec x = {0.1, 0.2, 0.3, 0.4}, gt = {0.1, 0.25, 0.3, 0.2};
  const LossValue l = negative_psnr_loss(x, gt);
  const double mse = (0.05 * 0.05 + 0.2 * 0.2) / 4;
  CHECK(l.loss == doctest::Approx(10 * std::log10(mse)));
  for (std::size_t i = 0; i < 4; ++i) {
    Vec xp = x, xm = x;
    xp[i] += 1e-7;
    xm[i] -= 1e-7;
    const double fd = (negative_psnr_loss(xp, gt).loss - negative_psnr_loss(xm, gt).loss) / 2e-7;
    if (x[i] != gt[i]) CHECK(l.grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  const Dims d{1, 5, 5};
  const Vec a = gaussian_vec(25, 1), b = gaussian_vec(25, 2);
  const LossValue m = negative_psnr_loss(a, b, d, 1);
  CHECK(m.grad[0] == 0.0);
  CHECK(m.grad[6] != 0.0);
  CHECK_THROWS_AS(negative_psnr_loss(a, b, d, 3), Error);
  CHECK_THROWS_AS(negative_psnr_loss(a, a), Error);
  const LossValue hs = half_squared_loss(x, gt);
  CHECK(hs.loss == doctest::Approx(0.5 * (0.05 * 0.05 + 0.2 * 0.2)));
}
