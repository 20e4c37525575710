#include "lirls/implicit_grad.hpp"

#include <cmath>

#include "lirls/error.hpp"

namespace lirls {

Vec fixed_point_map(const Problem& problem, std::span<const double> x) {
  const IterateWeights w = build_weights(problem, x);
  Vec g(x.size());
  system_apply(problem, w, x, g, false);
  const Vec aty = normal_rhs(problem);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= aty[i];
  return g;
}

FixedPointResidual::FixedPointResidual(const Problem& problem, Vec x_star, double tolerance)
    : problem_(problem), x_(std::move(x_star)) {
  problem_.validate();
  require(x_.size() == problem_.x_dims().size(), ErrorCode::kDimension,
          "fixed point: x* has the wrong size");
  field_ = build_weights(problem_, x_, true);
  g_.resize(x_.size());
  system_apply(problem_, field_, x_, g_, false);
  const Vec aty = normal_rhs(problem_);
  for (std::size_t i = 0; i < g_.size(); ++i) g_[i] -= aty[i];
  relative_norm_ = norm2(g_) / norm2(aty);
  if (!(relative_norm_ <= tolerance))
    fail(ErrorCode::kConvergence,
         "fixed point: residual " + std::to_string(relative_norm_) + " exceeds " +
             std::to_string(tolerance) + "; implicit differentiation needs a converged x*");
}

void FixedPointResidual::jacobian_apply(std::span<const double> v, std::span<double> out) const {
  hessian_apply(problem_, field_, v, out);
  const double s2 = problem_.sigma * problem_.sigma;
  for (auto& e : out) e *= s2;
}

bool FixedPointResidual::convex() const {
  if (!field_) return true;
  const PriorSpec& s = problem_.prior;
  if (s.p != 1.0) return false;
  if (s.family == PriorFamily::kSparse) return true;
  if (s.provider == WeightProvider::kFileLoaded) {
    for (std::size_t i = 0; i < s.weight_map.positions(); ++i)
      for (std::size_t j = 1; j < s.weight_map.planes; ++j)
        if (s.weight_map.at(j, i) != s.weight_map.at(0, i)) return false;
    return true;
  }
  for (double w : s.weights)
    if (w != s.weights.front()) return false;
  return true;
}

AdjointResult adjoint_solve(const FixedPointResidual& residual, std::span<const double> loss_grad,
                            const SolveConfig& cfg) {
  require(loss_grad.size() == residual.x_star().size(), ErrorCode::kDimension,
          "adjoint solve: loss gradient has the wrong size");
  const MatVec mv = [&](std::span<const double> v, std::span<double> out) {
    residual.jacobian_apply(v, out);
  };
  const Vec zero(loss_grad.size(), 0.0);
  AdjointResult r;
  r.used_cg = residual.convex();
  SolveConfig plain = cfg;
  plain.preconditioner = nullptr;
  if (r.used_cg) {
    r.report = cg_solve(mv, loss_grad, zero, plain);
    if (r.report.converged) {
      r.v = r.report.solution;
      return r;
    }
    // Singular convex systems (unobserved border pixels) break CG.
    r.used_cg = false;
  }
  r.report = minres_solve(mv, loss_grad, zero, plain);
  r.v = r.report.solution;
  return r;
}

GradientBundle vjp_raw(const FixedPointResidual& residual, std::span<const double> v,
                       const Trainables& which) {
  const Problem& pr = residual.problem();
  require(v.size() == residual.x_star().size(), ErrorCode::kDimension,
          "vjp: adjoint vector has the wrong size");
  for (double e : v) require(std::isfinite(e), ErrorCode::kDivergence, "vjp: adjoint vector is not finite");
  GradientBundle b;
  b.d_weights.assign(pr.prior.weights.size(), 0.0);
  if (pr.bank) b.d_filters.assign(pr.bank->coeffs().size(), 0.0);
  b.adjoint.assign(v.begin(), v.end());
  if (!residual.field()) return b;

  const PriorField& field = *residual.field();
  const double s2 = pr.sigma * pr.sigma;
  const Features gv = analyze(pr, v);
  if (which.weights) {
    require(pr.prior.provider == WeightProvider::kGlobalLearned, ErrorCode::kConfig,
            "vjp: weight gradients need the global weight provider");
    field.accumulate_weight_grad(gv, s2, b.d_weights);
  }
  if (which.p) b.d_p = s2 * field.p_grad(gv);
  if (which.filters) {
    // v^T G^T grad phi(G x) differentiated in G: once through the outer G^T
    // and once through z = G x inside grad phi.
    const Features grad_phi = field.gradient();
    Features hess_gv;
    field.apply_hessian(gv, hess_gv);
    pr.bank->accumulate_coeff_grad(pr.mode(), pr.x_dims(), v, grad_phi, s2, b.d_filters);
    pr.bank->accumulate_coeff_grad(pr.mode(), pr.x_dims(), residual.x_star(), hess_gv, s2,
                                   b.d_filters);
  }
  auto finite = [](const Vec& a) {
    for (double e : a)
      if (!std::isfinite(e)) return false;
    return true;
  };
  require(finite(b.d_filters) && finite(b.d_weights) && std::isfinite(b.d_p),
          ErrorCode::kDivergence, "vjp: non-finite gradient component");
  return b;
}

GradientBundle vjp_theta(const FixedPointResidual& residual, std::span<const double> v,
                         const Trainables& which) {
  GradientBundle b = vjp_raw(residual, v, which);
  for (auto& e : b.d_filters) e = -e;
  for (auto& e : b.d_weights) e = -e;
  b.d_p = -b.d_p;
  return b;
}

GradientBundle implicit_loss_grad(const Problem& problem, const Vec& x_star,
                                  std::span<const double> loss_grad, const Trainables& which,
                                  const SolveConfig& cfg) {
  const FixedPointResidual residual(problem, x_star);
  AdjointResult adj = adjoint_solve(residual, loss_grad, cfg);
  GradientBundle b = vjp_theta(residual, adj.v, which);
  b.adjoint_report = std::move(adj.report);
  b.adjoint_report.solution.clear();
  return b;
}

LossValue negative_psnr_loss(std::span<const double> x, std::span<const double> gt, double peak) {
  require(x.size() == gt.size() && !x.empty(), ErrorCode::kDimension, "loss: size mismatch");
  require(peak > 0.0, ErrorCode::kDomain, "loss: peak must be > 0");
  const double n = static_cast<double>(x.size());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double d = static_cast<long double>(x[i]) - gt[i];
    acc += d * d;
  }
  const double mse = static_cast<double>(acc) / n;
  require(mse > 0.0, ErrorCode::kDomain, "loss: PSNR is unbounded for identical images");
  LossValue out;
  out.loss = -10.0 * std::log10(peak * peak / mse);
  out.grad.resize(x.size());
  const double c = 10.0 / std::log(10.0) * 2.0 / (n * mse);
  for (std::size_t i = 0; i < x.size(); ++i) out.grad[i] = c * (x[i] - gt[i]);
  return out;
}

LossValue negative_psnr_loss(std::span<const double> x, std::span<const double> gt, Dims dims,
                             std::size_t margin, double peak) {
  require(x.size() == dims.size() && gt.size() == dims.size(), ErrorCode::kDimension,
          "loss: size mismatch");
  require(2 * margin < dims.height && 2 * margin < dims.width, ErrorCode::kDomain,
          "loss: margin leaves no interior pixels");
  const Dims inner{dims.channels, dims.height - 2 * margin, dims.width - 2 * margin};
  auto crop = [&](std::span<const double> src) {
    Vec out;
    out.reserve(inner.size());
    for (std::size_t c = 0; c < dims.channels; ++c)
      for (std::size_t i = margin; i + margin < dims.height; ++i)
        for (std::size_t j = margin; j + margin < dims.width; ++j)
          out.push_back(src[(c * dims.height + i) * dims.width + j]);
    return out;
  };
  const LossValue inner_loss = negative_psnr_loss(crop(x), crop(gt), peak);
  LossValue out;
  out.loss = inner_loss.loss;
  out.grad.assign(x.size(), 0.0);
  std::size_t q = 0;
  for (std::size_t c = 0; c < dims.channels; ++c)
    for (std::size_t i = margin; i + margin < dims.height; ++i)
      for (std::size_t j = margin; j + margin < dims.width; ++j)
        out.grad[(c * dims.height + i) * dims.width + j] = inner_loss.grad[q++];
  return out;
}

LossValue half_squared_loss(std::span<const double> x, std::span<const double> gt) {
  require(x.size() == gt.size(), ErrorCode::kDimension, "loss: size mismatch");
  LossValue out;
  out.grad.resize(x.size());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.grad[i] = x[i] - gt[i];
    acc += 0.5L * out.grad[i] * out.grad[i];
  }
  out.loss = static_cast<double>(acc);
  return out;
}

}  // namespace lirls
