#include "lirls/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lirls/error.hpp"

namespace lirls {

namespace {

void check_config(const SolveConfig& cfg, std::span<const double> b, std::span<const double> x0) {
  require(cfg.max_iterations >= 1, ErrorCode::kDomain, "solver: max_iterations must be >= 1");
  require(cfg.relative_tolerance > 0.0, ErrorCode::kDomain, "solver: tolerance must be > 0");
  require(b.size() == x0.size(), ErrorCode::kDimension, "solver: b and x0 sizes differ");
}

double explicit_residual(const MatVec& mv, std::span<const double> b, std::span<const double> x,
                         double bnorm, Vec& scratch) {
  mv(x, scratch);
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double d = b[i] - scratch[i];
    s += d * d;
  }
  return std::sqrt(s) / bnorm;
}

void check_finite(double v, const char* solver, std::size_t it) {
  if (!std::isfinite(v))
    fail(ErrorCode::kDivergence,
         std::string(solver) + ": non-finite value at iteration " + std::to_string(it));
}

}  // namespace

SolveReport cg_solve(const MatVec& mv, std::span<const double> b, std::span<const double> x0,
                     const SolveConfig& cfg) {
  check_config(cfg, b, x0);
  const std::size_t n = b.size();
  SolveReport rep;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    rep.solution.assign(n, 0.0);
    rep.converged = true;
    return rep;
  }
  const double tol = cfg.relative_tolerance;
  Vec x(x0.begin(), x0.end()), r(n), z(n), p(n), q(n);
  mv(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];

  auto precondition = [&]() {
    if (cfg.preconditioner) cfg.preconditioner(r, z);
    else std::copy(r.begin(), r.end(), z.begin());
  };

  double rnorm = norm2(r);
  if (rnorm / bnorm <= tol) {
    rep.final_relative_residual = explicit_residual(mv, b, x, bnorm, q);
    rep.converged = rep.final_relative_residual <= tol;
    if (rep.converged) {
      rep.solution = std::move(x);
      return rep;
    }
  }
  precondition();
  p = z;
  double rz = dot(r, z);
  std::size_t it = 0;
  while (it < cfg.max_iterations) {
    mv(p, q);
    const double pq = dot(p, q);
    check_finite(pq, "cg", it + 1);
    if (pq <= 0.0) break;  // not SPD along p, or exact solution reached
    const double a = rz / pq;
    axpy(a, p, x);
    axpy(-a, q, r);
    ++it;
    rnorm = norm2(r);
    check_finite(rnorm, "cg", it);
    if (rnorm / bnorm <= tol) {
      // Guard against recurrence drift before declaring convergence.
      const double true_res = explicit_residual(mv, b, x, bnorm, q);
      if (true_res <= tol) break;
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    }
    precondition();
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  rep.iterations = it;
  rep.final_relative_residual = explicit_residual(mv, b, x, bnorm, q);
  check_finite(rep.final_relative_residual, "cg", it);
  rep.converged = rep.final_relative_residual <= tol;
  rep.solution = std::move(x);
  return rep;
}

SolveReport minres_solve(const MatVec& mv, std::span<const double> b, std::span<const double> x0,
                         const SolveConfig& cfg) {
  check_config(cfg, b, x0);
  const std::size_t n = b.size();
  SolveReport rep;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    rep.solution.assign(n, 0.0);
    rep.converged = true;
    return rep;
  }
  const double tol = cfg.relative_tolerance;
  const double eps = std::numeric_limits<double>::epsilon();

  Vec x(x0.begin(), x0.end()), scratch(n);
  std::size_t total = 0;
  // Restart from the explicit residual if the recurrence claims convergence
  // but the true residual disagrees.
  while (total < cfg.max_iterations) {
    Vec r1(n), y(n), v(n), w(n, 0.0), w1(n), w2(n, 0.0);
    mv(x, scratch);
    for (std::size_t i = 0; i < n; ++i) r1[i] = b[i] - scratch[i];
    double beta1 = norm2(r1);
    if (beta1 / bnorm <= tol) break;
    y = r1;
    Vec r2 = r1;
    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0, tnorm2 = 0.0;
    bool recurrence_converged = false;
    for (std::size_t k = 1; total < cfg.max_iterations; ++k) {
      const double s = 1.0 / beta;
      for (std::size_t i = 0; i < n; ++i) v[i] = s * y[i];
      mv(v, y);
      if (k >= 2) axpy(-beta / oldb, r1, y);
      const double alfa = dot(v, y);
      check_finite(alfa, "minres", total + 1);
      axpy(-alfa / beta, r2, y);
      r1.swap(r2);
      r2 = y;
      oldb = beta;
      beta = norm2(y);
      const double oldeps = epsln;
      const double delta = cs * dbar + sn * alfa;
      const double gbar = sn * dbar - cs * alfa;
      epsln = sn * beta;
      dbar = -cs * beta;
      tnorm2 += alfa * alfa + oldb * oldb + beta * beta;
      // ||M r|| / (||M|| ||r||) for the current iterate, before the rotation.
      const double ls_measure = std::hypot(gbar, dbar) / std::sqrt(tnorm2);
      const double gamma = std::max(std::hypot(gbar, beta), eps);
      cs = gbar / gamma;
      sn = beta / gamma;
      const double phi = cs * phibar;
      phibar = sn * phibar;
      w1.swap(w2);
      w2.swap(w);
      for (std::size_t i = 0; i < n; ++i) w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
      axpy(phi, w, x);
      ++total;
      check_finite(phibar, "minres", total);
      if (phibar / bnorm <= tol) {
        recurrence_converged = true;
        break;
      }
      if (k >= 2 && ls_measure <= cfg.least_squares_tolerance) {
        rep.least_squares = true;
        break;
      }
      if (beta <= eps * beta1) break;  // Krylov space exhausted
    }
    const double true_res = explicit_residual(mv, b, x, bnorm, scratch);
    if (true_res <= tol || !recurrence_converged) break;
  }
  rep.iterations = total;
  rep.final_relative_residual = explicit_residual(mv, b, x, bnorm, scratch);
  check_finite(rep.final_relative_residual, "minres", total);
  rep.converged = rep.final_relative_residual <= tol || rep.least_squares;
  rep.solution = std::move(x);
  return rep;
}

LanczosResult lanczos_extreme_eigs(const MatVec& mv, std::size_t dim, std::size_t iterations,
                                   std::uint64_t seed) {
  require(dim >= 1 && iterations >= 1, ErrorCode::kDomain, "lanczos: empty problem");
  iterations = std::min(iterations, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  std::vector<Vec> basis;
  basis.reserve(iterations);
  Vec q(dim);
  for (auto& e : q) e = normal(rng);
  const double qn = norm2(q);
  for (auto& e : q) e /= qn;

  std::vector<double> alpha, beta;
  Vec w(dim);
  LanczosResult res;
  double last_beta = 0.0;
  for (std::size_t j = 0; j < iterations; ++j) {
    basis.push_back(q);
    mv(q, w);
    const double a = dot(q, w);
    check_finite(a, "lanczos", j + 1);
    alpha.push_back(a);
    // Full reorthogonalisation, two passes of classical Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : basis) axpy(-dot(u, w), u, w);
    const double b = norm2(w);
    last_beta = b;
    const double scale = std::max(std::abs(a), j ? beta.back() : 0.0);
    if (b <= 1e-13 * std::max(scale, 1e-300)) {
      res.early_exit = true;
      break;
    }
    if (j + 1 == iterations) break;
    beta.push_back(b);
    for (std::size_t i = 0; i < dim; ++i) q[i] = w[i] / b;
  }

  const std::size_t m = alpha.size();
  Eigen::VectorXd diag(m), sub(m > 1 ? m - 1 : 1);
  for (std::size_t i = 0; i < m; ++i) diag[static_cast<Eigen::Index>(i)] = alpha[i];
  for (std::size_t i = 0; i + 1 < m; ++i) sub[static_cast<Eigen::Index>(i)] = beta[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (m == 1) {
    res.lambda_min = res.lambda_max = alpha[0];
  } else {
    es.computeFromTridiagonal(diag, sub.head(static_cast<Eigen::Index>(m - 1)),
                              Eigen::ComputeEigenvectors);
    const auto& ev = es.eigenvalues();
    const auto& vecs = es.eigenvectors();
    const auto last = static_cast<Eigen::Index>(m - 1);
    res.lambda_min = ev[0];
    res.lambda_max = ev[last];
    res.residual_min = std::abs(last_beta * vecs(last, 0));
    res.residual_max = std::abs(last_beta * vecs(last, last));
  }
  if (m == 1) res.residual_min = res.residual_max = last_beta;
  if (res.early_exit) res.residual_min = res.residual_max = 0.0;
  res.iterations = m;
  return res;
}

}  // namespace lirls
