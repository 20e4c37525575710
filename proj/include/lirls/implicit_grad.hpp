#pragma once

#include <functional>
#include <span>

#include "lirls/irls.hpp"

namespace lirls {

// Which parameters receive gradients; the rest come back as exact zeros.
struct Trainables {
  bool filters = false;
  bool weights = false;
  bool p = false;
};

// g(x, theta) = S(x, theta) x - A^T y frozen at a converged x*.
class FixedPointResidual {
 public:
  // Throws kConvergence when ||g|| / ||A^T y|| exceeds `tolerance`.
  FixedPointResidual(const Problem& problem, Vec x_star, double tolerance = 1e-4);

  const Problem& problem() const { return problem_; }
  const Vec& x_star() const { return x_; }
  const IterateWeights& field() const { return field_; }
  double relative_norm() const { return relative_norm_; }
  const Vec& value() const { return g_; }

  // (dg/dx) v = sigma^2 H_J(x*) v.
  void jacobian_apply(std::span<const double> v, std::span<double> out) const;
  // True when dg/dx is positive semidefinite for every x: p = 1 with a
  // sparse prior or with equal low-rank weights.
  bool convex() const;

 private:
  Problem problem_;
  Vec x_;
  IterateWeights field_;
  Vec g_;
  double relative_norm_ = 0.0;
};

// g(x, theta) for a given problem, without convergence checks.
Vec fixed_point_map(const Problem& problem, std::span<const double> x);

struct AdjointResult {
  Vec v;
  SolveReport report;
  bool used_cg = false;
};

inline SolveConfig backward_solve_config() { return {2000, 1e-2, {}, 1e-4}; }

// Solves (dg/dx*) v = loss_grad with CG (convex case) or MINRES.
AdjointResult adjoint_solve(const FixedPointResidual& residual, std::span<const double> loss_grad,
                            const SolveConfig& cfg = backward_solve_config());

struct GradientBundle {
  Vec d_filters;  // layout of FilterBank::coeffs()
  Vec d_weights;  // layout of PriorSpec::weights
  double d_p = 0.0;
  Vec adjoint;
  SolveReport adjoint_report;
};

// -(dg/dtheta)^T v for the enabled parameters.
GradientBundle vjp_theta(const FixedPointResidual& residual, std::span<const double> v,
                         const Trainables& which);

// d(v^T g)/dtheta without the sign flip; the finite-difference target.
GradientBundle vjp_raw(const FixedPointResidual& residual, std::span<const double> v,
                       const Trainables& which);

GradientBundle implicit_loss_grad(const Problem& problem, const Vec& x_star,
                                  std::span<const double> loss_grad, const Trainables& which,
                                  const SolveConfig& cfg = backward_solve_config());

struct LossValue {
  double loss = 0.0;
  Vec grad;  // dL/dx
};

// L = -PSNR(x, gt); MSE over the whole tensor.
LossValue negative_psnr_loss(std::span<const double> x, std::span<const double> gt,
                             double peak = 1.0);
// -PSNR over the pixels at least `margin` away from every image edge; the
// gradient is zero on the excluded band.
LossValue negative_psnr_loss(std::span<const double> x, std::span<const double> gt, Dims dims,
                             std::size_t margin, double peak = 1.0);
// L = 0.5 ||x - gt||^2
LossValue half_squared_loss(std::span<const double> x, std::span<const double> gt);

}  // namespace lirls
