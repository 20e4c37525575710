#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

#include "lirls/image.hpp"
#include "lirls/operators.hpp"
#include "lirls/solvers.hpp"

namespace testing {

inline lirls::Vec gaussian_vec(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  lirls::Vec v(n);
  for (double& x : v) x = g(rng);
  return v;
}

inline lirls::Vec uniform_vec(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  lirls::Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Dense matrix of a linear operator, one column per basis vector.
inline Eigen::MatrixXd dense_of(const lirls::LinearOperator& op) {
  const std::size_t n = op.input_dims().size(), m = op.output_dims().size();
  Eigen::MatrixXd a(m, n);
  lirls::Vec e(n, 0.0), col(m);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    for (std::size_t i = 0; i < m; ++i) a(i, j) = col[i];
    e[j] = 0.0;
  }
  return a;
}

inline Eigen::MatrixXd dense_adjoint_of(const lirls::LinearOperator& op) {
  const std::size_t n = op.input_dims().size(), m = op.output_dims().size();
  Eigen::MatrixXd at(n, m);
  lirls::Vec e(m, 0.0), col(n);
  for (std::size_t j = 0; j < m; ++j) {
    e[j] = 1.0;
    op.adjoint(e, col);
    for (std::size_t i = 0; i < n; ++i) at(i, j) = col[i];
    e[j] = 0.0;
  }
  return at;
}

inline lirls::MatVec matvec_of(const Eigen::MatrixXd& m) {
  return [&m](std::span<const double> v, std::span<double> out) {
    Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
    Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
    y = m * x;
  };
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testing
