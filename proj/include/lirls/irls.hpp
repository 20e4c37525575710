#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lirls/image.hpp"
#include "lirls/operators.hpp"
#include "lirls/priors.hpp"
#include "lirls/solvers.hpp"

namespace lirls {

inline constexpr double kDefaultDelta = 8e-4;

// Data term (1/2 sigma^2)||y - A x||^2 plus an analysis prior over G x.
struct Problem {
  OperatorPtr forward;
  Vec y;
  double sigma = 0.01;
  std::shared_ptr<const FilterBank> bank;  // null disables the prior term
  PriorSpec prior;
  double delta = kDefaultDelta;

  double alpha() const { return delta * sigma * sigma; }
  Dims x_dims() const { return forward->input_dims(); }
  FeatureMode mode() const { return prior.mode(); }
  bool has_prior() const { return static_cast<bool>(bank); }
  void validate() const;
};

// Majorizer weights W_i built at one iterate; empty when the problem has no
// prior term.
using IterateWeights = std::optional<PriorField>;

Features analyze(const Problem& problem, std::span<const double> x);
IterateWeights build_weights(const Problem& problem, std::span<const double> x,
                             bool with_hessian = false);

double objective(const Problem& problem, std::span<const double> x);
double data_term(const Problem& problem, std::span<const double> x);
Vec objective_gradient(const Problem& problem, std::span<const double> x);
Vec normal_rhs(const Problem& problem);  // A^T y

// (A^T A + p sigma^2 sum_i G_i^T W_i G_i + alpha I) v. With include_alpha
// false the alpha term is dropped, giving S^k.
void system_apply(const Problem& problem, const IterateWeights& weights,
                  std::span<const double> v, std::span<double> out, bool include_alpha = true);

// Hessian of J at the point the weights were built for (requires a field
// built with the Hessian data): A^T A / sigma^2 + sum_i G_i^T Hess phi G_i.
void hessian_apply(const Problem& problem, const IterateWeights& weights,
                   std::span<const double> v, std::span<double> out);

// The augmented quadratic majorizer of J around x_k, evaluated at x, in two
// algebraically equal forms: the weighted sum of per-group surrogates plus
// (delta/2)||x - x_k||^2, and the second-order expansion around x_k.
double majorizer_value(const Problem& problem, const IterateWeights& weights_k,
                       std::span<const double> x_k, std::span<const double> x);
double majorizer_expansion(const Problem& problem, const IterateWeights& weights_k,
                           std::span<const double> x_k, std::span<const double> x);

// Circulant approximation of the normal-equation matrix, inverted per FFT
// bin and per channel.
class CirculantPreconditioner {
 public:
  CirculantPreconditioner(const Problem& problem, const IterateWeights& weights);
  ~CirculantPreconditioner();
  CirculantPreconditioner(const CirculantPreconditioner&) = delete;
  CirculantPreconditioner& operator=(const CirculantPreconditioner&) = delete;

  void apply(std::span<const double> r, std::span<double> z) const;
  MatVec as_matvec() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct IrlsLimits {
  std::size_t max_steps = 15;
  double tolerance = 1e-4;
  std::size_t consecutive = 3;
  SolveConfig inner{50, 1e-6, {}};
  bool precondition = true;
  double descent_slack = 1e-10;
  // Re-solve with a tight inner tolerance before reporting a descent violation.
  bool strict = true;
  bool throw_on_violation = true;
  // Evaluate the majorizer sandwich every step.
  bool check_majorizer = false;
  bool record_timing = false;

  static IrlsLimits training() {
    IrlsLimits l;
    l.max_steps = 400;
    l.inner.max_iterations = 150;
    return l;
  }
  static IrlsLimits inference(std::size_t steps = 15) {
    IrlsLimits l;
    l.max_steps = steps;
    return l;
  }
};

struct IrlsState {
  Vec x;
  std::size_t k = 0;
  // Entry k describes iterate x^k; inner_iterations[0] and wall_ms[0] are 0.
  std::vector<double> objective_trace;
  std::vector<double> residual_trace;
  std::vector<std::size_t> inner_iterations;
  std::vector<double> wall_ms;
  std::size_t consecutive_converged = 0;
  bool converged = false;
  std::size_t descent_violations = 0;
  double max_descent_increase = 0.0;
  double max_sandwich_defect = 0.0;  // check_majorizer only
  double max_tightness_defect = 0.0;  // check_majorizer only
  IterateWeights weights;            // built at x
  SolveReport last_solve;
};

IrlsState irls_start(const Problem& problem, Vec x0);
// One majorize-minimize step from state.x; updates every trace.
void irls_step(const Problem& problem, IrlsState& state, const IrlsLimits& limits);
IrlsState irls_solve(const Problem& problem, Vec x0, const IrlsLimits& limits);

// ||S x - A^T y|| / ||A^T y|| at the iterate the weights were built for.
double fixed_point_residual(const Problem& problem, const IterateWeights& weights,
                            std::span<const double> x);

void write_trace_csv(const IrlsState& state, std::ostream& out);
void save_trace_csv(const IrlsState& state, const std::filesystem::path& path);

// ---- convergence-rate diagnostic --------------------------------------------

struct RateBoundOptions {
  std::size_t lanczos_iterations = 300;
  std::uint64_t seed = 7;
  std::size_t power_iterations = 500;
  // Extra IRLS steps from x* used to estimate J(x*).
  std::size_t extension_steps = 400;
  std::size_t window = 10;
  // Use central differences of the gradient instead of the analytic Hessian.
  bool finite_difference_hvp = false;
};

struct RateBoundReport {
  double nu_ub = 1.0;
  // Same bound with the sum over groups replaced by the largest group term.
  double nu_local = 1.0;
  double lambda_min_H = 0.0;
  double lambda_max_H = 0.0;
  double lanczos_residual = 0.0;
  std::size_t lanczos_iterations = 0;
  double norm_A_sq = 0.0;
  double norm_G_sq = 0.0;       // ||G_i||^2, identical for every group
  double sum_max_weight = 0.0;  // sum_i max_weight_i
  double max_max_weight = 0.0;  // max_i max_weight_i
  double alpha = 0.0;
  double denominator = 0.0;
  double j_star = 0.0;
  double observed_ratio = 0.0;
  std::size_t ratio_samples = 0;
};

// Geometric-mean contraction of J_k - j_star over the last `window` steps of
// the trace whose gap stays above a relative noise floor.
double observed_contraction(std::span<const double> trace, double j_star, std::size_t window,
                            std::size_t* samples = nullptr);

RateBoundReport rate_bound(const Problem& problem, const IrlsState& solved,
                           const RateBoundOptions& options = {});
void write_rate_report(const RateBoundReport& report, std::ostream& out);

// ---- initialisation ---------------------------------------------------------

// Keys cubic (a = -0.5) upsampling; sample t of the output sits at t / scale
// in input coordinates, edges clamped.
Image bicubic_upsample(const Image& y, std::size_t scale);
// Normalised convolution of the known CFA samples with [1 2 1; 2 4 2; 1 2 1].
Image bilinear_demosaick(const Image& mosaic, const CfaOperator& cfa);
// Edge-replicate padding to the target size; offset top/left by the given
// amounts.
Image pad_replicate(const Image& y, Dims target, std::size_t top, std::size_t left);
// Circular-FFT Wiener deconvolution of an edge-padded observation. The
// per-frequency regulariser is sigma^2 over a signal power estimate: the
// measured variance of y distributed as 1 / (|w|^2 + w0^2).
Image wiener_deconvolve(const Image& y, const Kernel& kernel, double sigma);
// Initial estimate for a problem: Wiener for blur/SR (bicubic first for SR),
// bilinear for CFA, A^T y otherwise.
Image initial_estimate(const Problem& problem);
// y upsampled or padded to the unknown's size without deconvolution; used as
// the naive baseline.
Image naive_estimate(const Problem& problem);

}  // namespace lirls
