#include "lirls/irls.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lirls/error.hpp"

namespace lirls {

namespace {

long double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

long double dot_ld(std::span<const double> a, std::span<const double> b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

double weighted_quadratic(const PriorField& field, const Features& z) {
  Features wz;
  field.apply_weights(z, wz);
  return static_cast<double>(dot_ld(z.data, wz.data));
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void Problem::validate() const {
  require(static_cast<bool>(forward), ErrorCode::kConfig, "problem: missing forward operator");
  require(y.size() == forward->output_dims().size(), ErrorCode::kDimension,
          "problem: observation has " + std::to_string(y.size()) + " values, operator emits " +
              to_string(forward->output_dims()));
  require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::kDomain, "problem: sigma must be > 0");
  require(delta > 0.0, ErrorCode::kDomain, "problem: delta must be > 0");
  for (double v : y)
    require(std::isfinite(v), ErrorCode::kDomain, "problem: observation is not finite");
  if (bank) {
    const Features layout = bank->feature_layout(mode(), x_dims());
    const std::size_t dim = mode() == FeatureMode::kSparse ? layout.planes
                                                           : layout.planes / x_dims().channels;
    prior.validate(PriorSpec::weight_count(prior.family, dim, x_dims().channels),
                   layout.positions());
  }
}

Features analyze(const Problem& problem, std::span<const double> x) {
  return problem.bank->analyze(problem.mode(), problem.x_dims(), x);
}

IterateWeights build_weights(const Problem& problem, std::span<const double> x,
                             bool with_hessian) {
  if (!problem.has_prior()) return std::nullopt;
  return PriorField(problem.prior, analyze(problem, x), problem.x_dims().channels, with_hessian);
}

double data_term(const Problem& problem, std::span<const double> x) {
  const Vec ax = problem.forward->apply(x);
  return static_cast<double>(sum_sq_diff(problem.y, ax) /
                             (2.0L * problem.sigma * problem.sigma));
}

double objective(const Problem& problem, std::span<const double> x) {
  const IterateWeights w = build_weights(problem, x);
  return data_term(problem, x) + (w ? w->value() : 0.0);
}

Vec normal_rhs(const Problem& problem) { return problem.forward->adjoint(problem.y); }

Vec objective_gradient(const Problem& problem, std::span<const double> x) {
  const Vec ax = problem.forward->apply(x);
  Vec r(ax.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = ax[i] - problem.y[i];
  Vec g = problem.forward->adjoint(r);
  const double s2 = problem.sigma * problem.sigma;
  for (auto& v : g) v /= s2;
  if (const IterateWeights w = build_weights(problem, x)) {
    Vec prior_grad(x.size());
    problem.bank->synthesize(problem.mode(), w->gradient(), problem.x_dims(), prior_grad);
    axpy(1.0, prior_grad, g);
  }
  return g;
}

void system_apply(const Problem& problem, const IterateWeights& weights,
                  std::span<const double> v, std::span<double> out, bool include_alpha) {
  const Vec av = problem.forward->apply(v);
  problem.forward->adjoint(av, out);
  if (weights) {
    Features wz;
    weights->apply_weights(analyze(problem, v), wz);
    Vec back(v.size());
    problem.bank->synthesize(problem.mode(), wz, problem.x_dims(), back);
    axpy(problem.prior.p * problem.sigma * problem.sigma, back, out);
  }
  if (include_alpha) axpy(problem.alpha(), v, out);
}

void hessian_apply(const Problem& problem, const IterateWeights& weights,
                   std::span<const double> v, std::span<double> out) {
  const Vec av = problem.forward->apply(v);
  problem.forward->adjoint(av, out);
  const double inv = 1.0 / (problem.sigma * problem.sigma);
  for (auto& e : out) e *= inv;
  if (weights) {
    Features hz;
    weights->apply_hessian(analyze(problem, v), hz);
    Vec back(v.size());
    problem.bank->synthesize(problem.mode(), hz, problem.x_dims(), back);
    axpy(1.0, back, out);
  }
}

double majorizer_value(const Problem& problem, const IterateWeights& weights_k,
                       std::span<const double> x_k, std::span<const double> x) {
  double q = data_term(problem, x);
  if (weights_k) {
    const double quad_x = weighted_quadratic(*weights_k, analyze(problem, x));
    const double quad_k = weighted_quadratic(*weights_k, analyze(problem, x_k));
    q += weights_k->value() + 0.5 * problem.prior.p * (quad_x - quad_k);
  }
  return q + 0.5 * problem.delta * static_cast<double>(sum_sq_diff(x, x_k));
}

double majorizer_expansion(const Problem& problem, const IterateWeights& weights_k,
                           std::span<const double> x_k, std::span<const double> x) {
  Vec d(x.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - x_k[i];
  const Vec grad = objective_gradient(problem, x_k);
  Vec sd(d.size());
  system_apply(problem, weights_k, d, sd, true);
  const double s2 = problem.sigma * problem.sigma;
  return objective(problem, x_k) + static_cast<double>(dot_ld(grad, d)) +
         static_cast<double>(dot_ld(d, sd)) / (2.0 * s2);
}

double fixed_point_residual(const Problem& problem, const IterateWeights& weights,
                            std::span<const double> x) {
  const Vec aty = normal_rhs(problem);
  Vec sx(x.size());
  system_apply(problem, weights, x, sx, false);
  for (std::size_t i = 0; i < sx.size(); ++i) sx[i] -= aty[i];
  const double denom = norm2(aty);
  require(denom > 0.0, ErrorCode::kDomain, "fixed-point residual undefined for A^T y = 0");
  return norm2(sx) / denom;
}

IrlsState irls_start(const Problem& problem, Vec x0) {
  problem.validate();
  require(x0.size() == problem.x_dims().size(), ErrorCode::kDimension,
          "irls: initial estimate has wrong size");
  IrlsState s;
  s.x = std::move(x0);
  s.weights = build_weights(problem, s.x);
  s.objective_trace.push_back(data_term(problem, s.x) + (s.weights ? s.weights->value() : 0.0));
  s.residual_trace.push_back(fixed_point_residual(problem, s.weights, s.x));
  s.inner_iterations.push_back(0);
  s.wall_ms.push_back(0.0);
  return s;
}

void irls_step(const Problem& problem, IrlsState& state, const IrlsLimits& limits) {
  const auto t0 = std::chrono::steady_clock::now();
  const double alpha = problem.alpha();
  Vec rhs = normal_rhs(problem);
  axpy(alpha, state.x, rhs);

  const MatVec mv = [&](std::span<const double> v, std::span<double> out) {
    system_apply(problem, state.weights, v, out, true);
  };
  SolveConfig cfg = limits.inner;
  std::unique_ptr<CirculantPreconditioner> pre;
  if (limits.precondition) {
    pre = std::make_unique<CirculantPreconditioner>(problem, state.weights);
    cfg.preconditioner = pre->as_matvec();
  }

  const double j_old = state.objective_trace.back();
  SolveReport rep = cg_solve(mv, rhs, state.x, cfg);
  IterateWeights w_new = build_weights(problem, rep.solution);
  double j_new = data_term(problem, rep.solution) + (w_new ? w_new->value() : 0.0);

  if (j_new > j_old + limits.descent_slack && limits.strict) {
    SolveConfig tight = cfg;
    tight.relative_tolerance = 1e-12;
    tight.max_iterations = std::max<std::size_t>(cfg.max_iterations, 2000);
    rep = cg_solve(mv, rhs, state.x, tight);
    w_new = build_weights(problem, rep.solution);
    j_new = data_term(problem, rep.solution) + (w_new ? w_new->value() : 0.0);
  }
  if (j_new > j_old + limits.descent_slack) {
    ++state.descent_violations;
    state.max_descent_increase = std::max(state.max_descent_increase, j_new - j_old);
    if (limits.throw_on_violation) {
      std::ostringstream msg;
      msg << std::setprecision(17) << "irls: objective increased at step " << state.k + 1
          << " from " << j_old << " to " << j_new;
      fail(ErrorCode::kMajorizerViolation, msg.str());
    }
  }
  if (limits.check_majorizer) {
    const double q_new = majorizer_value(problem, state.weights, state.x, rep.solution);
    const double q_old = majorizer_value(problem, state.weights, state.x, state.x);
    state.max_sandwich_defect = std::max(state.max_sandwich_defect, j_new - q_new);
    state.max_tightness_defect = std::max(state.max_tightness_defect, std::abs(q_old - j_old));
  }

  state.x = std::move(rep.solution);
  state.weights = std::move(w_new);
  ++state.k;
  const double res = fixed_point_residual(problem, state.weights, state.x);
  state.objective_trace.push_back(j_new);
  state.residual_trace.push_back(res);
  state.inner_iterations.push_back(rep.iterations);
  state.wall_ms.push_back(limits.record_timing ? elapsed_ms(t0) : 0.0);
  rep.solution.clear();
  state.last_solve = std::move(rep);
  state.consecutive_converged = res < limits.tolerance ? state.consecutive_converged + 1 : 0;
  state.converged = state.consecutive_converged >= limits.consecutive;
}

IrlsState irls_solve(const Problem& problem, Vec x0, const IrlsLimits& limits) {
  require(limits.max_steps >= 1 && limits.consecutive >= 1 && limits.tolerance > 0.0,
          ErrorCode::kDomain, "irls: limits must be positive");
  IrlsState state = irls_start(problem, std::move(x0));
  while (!state.converged && state.k < limits.max_steps) irls_step(problem, state, limits);
  return state;
}

void write_trace_csv(const IrlsState& state, std::ostream& out) {
  out << "k,objective,residual,inner_iterations,wall_ms\n" << std::setprecision(17);
  for (std::size_t k = 0; k < state.objective_trace.size(); ++k)
    out << k << ',' << state.objective_trace[k] << ',' << state.residual_trace[k] << ','
        << state.inner_iterations[k] << ',' << state.wall_ms[k] << '\n';
}

void save_trace_csv(const IrlsState& state, const std::filesystem::path& path) {
  std::ofstream f(path);
  require(static_cast<bool>(f), ErrorCode::kIo, "cannot write trace " + path.string());
  write_trace_csv(state, f);
  require(static_cast<bool>(f), ErrorCode::kIo, "failed writing trace " + path.string());
}

}  // namespace lirls
