#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "lirls/image.hpp"

namespace lirls {

// y = M v. Must be pure: identical inputs give identical bits.
using MatVec = std::function<void(std::span<const double> v, std::span<double> out)>;

struct SolveConfig {
  std::size_t max_iterations = 150;
  double relative_tolerance = 1e-6;
  // Applies an approximation of M^{-1}; CG only.
  MatVec preconditioner;
  // MINRES only: also stop once ||M r|| / (||M|| ||r||) drops below this
  // (incompatible singular systems). Zero disables the test.
  double least_squares_tolerance = 0.0;
};

struct SolveReport {
  Vec solution;
  std::size_t iterations = 0;
  // ||b - M x|| / ||b|| recomputed explicitly at exit.
  double final_relative_residual = 0.0;
  bool converged = false;
  // MINRES only: stopped on the least-squares test, i.e. x is a least-squares solution of an incompatible system.
  bool least_squares = false;
};

// Conjugate gradients (preconditioned when cfg.preconditioner is set) for
// SPD systems. Convergence is judged on the unpreconditioned residual.
SolveReport cg_solve(const MatVec& mv, std::span<const double> b, std::span<const double> x0,
                     const SolveConfig& cfg);

// MINRES for symmetric, possibly indefinite or singular systems. Stops on
// either the relative residual or the least-squares criterion.
SolveReport minres_solve(const MatVec& mv, std::span<const double> b, std::span<const double> x0,
                         const SolveConfig& cfg);

struct LanczosResult {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  // Ritz residual norms ||M u - theta u||; each bounds the distance from the
  // Ritz value to the nearest true eigenvalue.
  double residual_min = 0.0;
  double residual_max = 0.0;
  std::size_t iterations = 0;
  bool early_exit = false;
};

// Lanczos with full reorthogonalisation; returns the extreme Ritz values.
LanczosResult lanczos_extreme_eigs(const MatVec& mv, std::size_t dim, std::size_t iterations,
                                   std::uint64_t seed);

}  // namespace lirls
