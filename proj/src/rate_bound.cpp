#include <algorithm>
#include <cmath>
#include <iomanip>

#include "lirls/error.hpp"
#include "lirls/irls.hpp"

namespace lirls {

double observed_contraction(std::span<const double> trace, double j_star, std::size_t window,
                            std::size_t* samples) {
  require(window >= 1, ErrorCode::kDomain, "observed_contraction: window must be >= 1");
  const double floor = 1e-13 * std::max(1.0, std::abs(j_star));
  std::size_t last = trace.size();
  while (last > 0 && !(trace[last - 1] - j_star > floor)) --last;
  if (samples) *samples = 0;
  if (last < 2) return 0.0;
  const std::size_t end = last - 1;
  const std::size_t begin = end >= window ? end - window : 0;
  if (samples) *samples = end - begin;
  const double ratio = (trace[end] - j_star) / (trace[begin] - j_star);
  return std::pow(ratio, 1.0 / static_cast<double>(end - begin));
}

RateBoundReport rate_bound(const Problem& problem, const IrlsState& solved,
                           const RateBoundOptions& options) {
  require(solved.converged, ErrorCode::kConvergence,
          "rate bound: the input solve did not meet the stopping criterion");
  problem.validate();
  const Vec& x = solved.x;
  const std::size_t n = x.size();
  RateBoundReport rep;
  rep.alpha = problem.alpha();

  const IterateWeights field = build_weights(problem, x, true);
  MatVec hvp;
  if (options.finite_difference_hvp) {
    const double xnorm = std::max(norm2(x), 1.0);
    hvp = [&](std::span<const double> v, std::span<double> out) {
      const double h = 1e-5 * xnorm / std::max(norm2(v), 1e-300);
      Vec xp(x), xm(x);
      axpy(h, v, xp);
      axpy(-h, v, xm);
      const Vec gp = objective_gradient(problem, xp);
      const Vec gm = objective_gradient(problem, xm);
      for (std::size_t i = 0; i < n; ++i) out[i] = (gp[i] - gm[i]) / (2.0 * h);
    };
  } else {
    hvp = [&](std::span<const double> v, std::span<double> out) {
      hessian_apply(problem, field, v, out);
    };
  }
  const LanczosResult lz =
      lanczos_extreme_eigs(hvp, n, std::min(options.lanczos_iterations, n), options.seed);
  rep.lambda_min_H = lz.lambda_min;
  rep.lambda_max_H = lz.lambda_max;
  rep.lanczos_residual = lz.residual_min;
  rep.lanczos_iterations = lz.iterations;

  const double norm_a = spectral_norm(*problem.forward, options.power_iterations, options.seed);
  rep.norm_A_sq = norm_a * norm_a;
  if (field) {
    rep.norm_G_sq = problem.bank->group_norm_sq(problem.mode());
    for (std::size_t i = 0; i < field->groups(); ++i) {
      const double m = field->max_weight(i);
      rep.sum_max_weight += m;
      rep.max_max_weight = std::max(rep.max_max_weight, m);
    }
  }
  const double s2 = problem.sigma * problem.sigma;
  const double p = problem.prior.p;
  rep.denominator = rep.norm_A_sq + p * s2 * rep.norm_G_sq * rep.sum_max_weight + rep.alpha;
  const double local = rep.norm_A_sq + p * s2 * rep.norm_G_sq * rep.max_max_weight + rep.alpha;
  rep.nu_ub = 1.0 - s2 * rep.lambda_min_H / rep.denominator;
  rep.nu_local = 1.0 - s2 * rep.lambda_min_H / local;

  // J(x*) reference: keep iterating with tight inner solves.
  IrlsState ext = solved;
  IrlsLimits lim = IrlsLimits::training();
  lim.inner.relative_tolerance = 1e-10;
  lim.inner.max_iterations = 500;
  lim.throw_on_violation = false;
  lim.strict = false;
  double j_star = *std::min_element(solved.objective_trace.begin(), solved.objective_trace.end());
  for (std::size_t s = 0; s < options.extension_steps; ++s) {
    irls_step(problem, ext, lim);
    j_star = std::min(j_star, ext.objective_trace.back());
    if (ext.residual_trace.back() < 1e-11) break;
  }
  rep.j_star = j_star;
  rep.observed_ratio =
      observed_contraction(solved.objective_trace, j_star, options.window, &rep.ratio_samples);
  return rep;
}

void write_rate_report(const RateBoundReport& r, std::ostream& out) {
  out << std::setprecision(12);
  out << "nu_ub: " << r.nu_ub << '\n'
      << "nu_local: " << r.nu_local << '\n'
      << "observed_ratio: " << r.observed_ratio << '\n'
      << "ratio_samples: " << r.ratio_samples << '\n'
      << "lambda_min_H: " << r.lambda_min_H << '\n'
      << "lambda_max_H: " << r.lambda_max_H << '\n'
      << "lanczos_residual: " << r.lanczos_residual << '\n'
      << "lanczos_iterations: " << r.lanczos_iterations << '\n'
      << "norm_A_sq: " << r.norm_A_sq << '\n'
      << "norm_G_sq: " << r.norm_G_sq << '\n'
      << "sum_max_weight: " << r.sum_max_weight << '\n'
      << "max_max_weight: " << r.max_max_weight << '\n'
      << "alpha: " << r.alpha << '\n'
      << "denominator: " << r.denominator << '\n'
      << "j_star: " << r.j_star << '\n';
}

}  // namespace lirls
