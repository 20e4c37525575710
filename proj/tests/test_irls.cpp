#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "lirls/error.hpp"
#include "lirls/irls.hpp"
#include "problems.hpp"

using namespace lirls;
using testing::gaussian_vec;
using testing::make_deblur_problem;
using testing::ProblemSpec;

namespace {

Eigen::MatrixXd dense_hessian(const Problem& pr, std::span<const double> x) {
  const IterateWeights w = build_weights(pr, x, true);
  const std::size_t n = x.size();
  Eigen::MatrixXd h(n, n);
  Vec e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    hessian_apply(pr, w, e, col);
    for (std::size_t i = 0; i < n; ++i) h(i, j) = col[i];
    e[j] = 0.0;
  }
  return h;
}

}  // namespace

TEST_CASE("objective gradient agrees with central differences") {
  for (auto family : {PriorFamily::kSparse, PriorFamily::kLowRank}) {
    for (double p : {1.0, 0.7}) {
      ProblemSpec s;
      s.dims = {3, 12, 12};
      s.family = family;
      s.p = p;
      const Problem pr = make_deblur_problem(s);
      const Vec x = initial_estimate(pr).data();
      const Vec g = objective_gradient(pr, x);
      std::mt19937_64 rng(3);
      std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
      for (int t = 0; t < 20; ++t) {
        const std::size_t i = pick(rng);
        const double h = 1e-6;
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (objective(pr, xp) - objective(pr, xm)) / (2 * h);
        CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])) + 1e-3);
      }
    }
  }
}

TEST_CASE("Hessian action is symmetric and matches differences of the gradient") {
  ProblemSpec s;
  s.dims = {3, 8, 8};
  s.kernel_size = 3;
  s.p = 0.8;
  const Problem pr = make_deblur_problem(s);
  const Vec x = initial_estimate(pr).data();
  const Eigen::MatrixXd h = dense_hessian(pr, x);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * h.cwiseAbs().maxCoeff());
  const Vec v = gaussian_vec(x.size(), 4);
  const double eps = 1e-6;
  Vec xp = x, xm = x;
  axpy(eps, v, xp);
  axpy(-eps, v, xm);
  const Vec gp = objective_gradient(pr, xp), gm = objective_gradient(pr, xm);
  Eigen::VectorXd fd(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fd(i) = (gp[i] - gm[i]) / (2 * eps);
  const Eigen::VectorXd hv = h * testing::to_eigen(v);
  CHECK((hv - fd).norm() <= 1e-5 * fd.norm());
}

TEST_CASE("majorizer forms agree, touch J at the anchor and lie above it") {
  for (auto family : {PriorFamily::kSparse, PriorFamily::kLowRank}) {
    ProblemSpec s;
    s.dims = {3, 10, 10};
    s.family = family;
    s.p = 0.6;
    const Problem pr = make_deblur_problem(s);
    const Vec xk = initial_estimate(pr).data();
    const IterateWeights wk = build_weights(pr, xk);
    CHECK(majorizer_value(pr, wk, xk, xk) == doctest::Approx(objective(pr, xk)).epsilon(1e-12));
    for (std::uint64_t t = 0; t < 10; ++t) {
      Vec x = xk;
      axpy(0.05 * static_cast<double>(t + 1), gaussian_vec(x.size(), t), x);
      const double q = majorizer_value(pr, wk, xk, x);
      CHECK(majorizer_expansion(pr, wk, xk, x) == doctest::Approx(q).epsilon(1e-9));
      CHECK(q >= objective(pr, x) - 1e-9 * std::abs(q));
    }
  }
}

TEST_CASE("system matrix is symmetric positive definite") {
  ProblemSpec s;
  s.dims = {1, 9, 9};
  s.kernel_size = 3;
  const Problem pr = make_deblur_problem(s);
  const Vec x = initial_estimate(pr).data();
  const IterateWeights w = build_weights(pr, x);
  const std::size_t n = x.size();
  Eigen::MatrixXd m(n, n);
  Vec e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    system_apply(pr, w, e, col);
    for (std::size_t i = 0; i < n; ++i) m(i, j) = col[i];
    e[j] = 0.0;
  }
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * m.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues()(0) >= pr.alpha() * (1 - 1e-9));
}

TEST_CASE("without a prior and with A = I the fixed point is y") {
  Problem pr;
  const Dims d{1, 6, 7};
  pr.forward = std::make_shared<IdentityOperator>(d);
  pr.y = gaussian_vec(d.size(), 1);
  pr.sigma = 0.05;
  IrlsLimits lim;
  lim.max_steps = 50;
  const IrlsState st = irls_solve(pr, Vec(d.size(), 0.0), lim);
  CHECK(st.converged);
  CHECK(testing::max_abs_diff(st.x, pr.y) < 1e-6);
}

TEST_CASE("preconditioned solve needs fewer inner iterations") {
  ProblemSpec s;
  s.dims = {3, 24, 24};
  const Problem pr = make_deblur_problem(s);
  const Vec x = initial_estimate(pr).data();
  IrlsLimits with, without;
  with.inner = without.inner = SolveConfig{500, 1e-8, {}};
  without.precondition = false;
  IrlsState a = irls_start(pr, x), b = irls_start(pr, x);
  irls_step(pr, a, with);
  irls_step(pr, b, without);
  CHECK(a.last_solve.converged);
  CHECK(a.inner_iterations[1] < b.inner_iterations[1]);
  CHECK(testing::max_abs_diff(a.x, b.x) < 1e-5);
}

TEST_CASE("IRLS descends monotonically and reaches the fixed point") {
  for (auto family : {PriorFamily::kSparse, PriorFamily::kLowRank}) {
    for (double p : {1.0, 0.6}) {
      CAPTURE(p);
      ProblemSpec s;
      s.dims = {3, 20, 20};
      s.family = family;
      s.p = p;
      const Problem pr = make_deblur_problem(s);
      IrlsLimits lim = IrlsLimits::training();
      lim.check_majorizer = true;
      const IrlsState st = irls_solve(pr, initial_estimate(pr).data(), lim);
      CHECK(st.converged);
      CHECK(st.descent_violations == 0);
      CHECK(st.max_sandwich_defect <= 1e-9 * std::abs(st.objective_trace.front()));
      for (std::size_t k = 1; k < st.objective_trace.size(); ++k)
        CHECK(st.objective_trace[k] <= st.objective_trace[k - 1] + 1e-10);
      const std::size_t n = st.residual_trace.size();
      for (std::size_t k = n - 3; k < n; ++k) CHECK(st.residual_trace[k] < 1e-4);
    }
  }
}

TEST_CASE("convex l1 solve is independent of the initial estimate") {
  ProblemSpec s;
  s.dims = {3, 16, 16};
  const Problem pr = make_deblur_problem(s);
  IrlsLimits lim = IrlsLimits::training();
  lim.tolerance = 1e-7;
  lim.max_steps = 2000;
  lim.inner = SolveConfig{300, 1e-10, {}};
  const IrlsState a = irls_solve(pr, initial_estimate(pr).data(), lim);
  const IrlsState b = irls_solve(pr, Vec(pr.x_dims().size(), 0.5), lim);
  const double ja = a.objective_trace.back(), jb = b.objective_trace.back();
  CHECK(std::abs(ja - jb) <= 1e-6 * std::abs(ja));
}

TEST_CASE("rate bound holds and its lambda_min matches the dense Hessian") {
  ProblemSpec s;
  s.dims = {1, 12, 12};
  s.kernel_size = 3;
  const Problem pr = make_deblur_problem(s);
  const IrlsState st = irls_solve(pr, initial_estimate(pr).data(), IrlsLimits::training());
  REQUIRE(st.converged);
  RateBoundOptions opt;
  opt.lanczos_iterations = 144;
  const RateBoundReport r = rate_bound(pr, st, opt);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_hessian(pr, st.x), Eigen::EigenvaluesOnly);
  CHECK(std::abs(r.lambda_min_H - es.eigenvalues()(0)) <= 1e-3 * std::max(1.0, es.eigenvalues()(0)));
  CHECK(r.nu_ub < 1.0);
  CHECK(r.nu_ub > 0.0);
  CHECK(r.observed_ratio <= r.nu_ub + 0.05);
  CHECK(r.nu_local <= r.nu_ub);
  RateBoundOptions fd = opt;
  fd.finite_difference_hvp = true;
  fd.extension_steps = 0;
  CHECK(rate_bound(pr, st, fd).lambda_min_H == doctest::Approx(r.lambda_min_H).epsilon(1e-3));
}

TEST_CASE("observed contraction of a geometric sequence") {
  Vec trace;
  for (int k = 0; k < 30; ++k) trace.push_back(2.0 + 5.0 * std::pow(0.7, k));
  std::size_t n = 0;
  CHECK(observed_contraction(trace, 2.0, 10, &n) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(n == 10);
  // Entries at the floor are skipped.
  Vec flat = {3.0, 2.5, 2.25, 2.0, 2.0};
  CHECK(observed_contraction(flat, 2.0, 10, &n) == doctest::Approx(0.5));
  CHECK(n == 2);
  CHECK(observed_contraction(Vec{2.0}, 2.0, 10) == 0.0);
}

TEST_CASE("trace CSV and limits") {
  ProblemSpec s;
  s.dims = {1, 12, 12};
  const Problem pr = make_deblur_problem(s);
  const IrlsState st = irls_solve(pr, initial_estimate(pr).data(), IrlsLimits::inference(4));
  CHECK(st.k == 4);
  std::ostringstream out;
  write_trace_csv(st, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,objective,residual,inner_iterations,wall_ms");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
  IrlsLimits bad;
  bad.max_steps = 0;
  CHECK_THROWS_AS(irls_solve(pr, initial_estimate(pr).data(), bad), Error);
  CHECK_THROWS_AS(irls_start(pr, Vec(3, 0.0)), Error);
}
