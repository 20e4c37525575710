#include "doctest.h"
#include "helpers.hpp"
#include "lirls/solvers.hpp"

using namespace lirls;
using testing::gaussian_vec;
using testing::matvec_of;
using testing::to_eigen;

namespace {

Eigen::MatrixXd random_spd(int n, std::uint64_t seed, double shift) {
  const Vec g = gaussian_vec(static_cast<std::size_t>(n * n), seed);
  const Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(g.data(), n, n);
  return a.transpose() * a / n + shift * Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd random_symmetric_with_spectrum(const Eigen::VectorXd& eigs, std::uint64_t seed) {
  const int n = static_cast<int>(eigs.size());
  const Vec g = gaussian_vec(static_cast<std::size_t>(n * n), seed);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::Map<const Eigen::MatrixXd>(g.data(), n, n));
  const Eigen::MatrixXd q = qr.householderQ();
  return q * eigs.asDiagonal() * q.transpose();
}

}  // namespace

TEST_CASE("CG matches a dense solve on SPD systems") {
  const int n = 200;
  const Eigen::MatrixXd m = random_spd(n, 1, 0.1);
  const Vec b = gaussian_vec(n, 2);
  const Eigen::VectorXd ref = m.ldlt().solve(to_eigen(b));
  SolveConfig cfg{2000, 1e-13, {}};
  const SolveReport r = cg_solve(matvec_of(m), b, Vec(n, 0.0), cfg);
  CHECK(r.converged);
  CHECK((to_eigen(r.solution) - ref).norm() <= 1e-8 * ref.norm());
  CHECK(r.final_relative_residual <= 1e-12);
}

TEST_CASE("preconditioned CG with the exact inverse converges in one step") {
  const int n = 50;
  const Eigen::MatrixXd m = random_spd(n, 3, 0.5);
  const Eigen::MatrixXd inv = m.inverse();
  const Vec b = gaussian_vec(n, 4);
  SolveConfig cfg{100, 1e-10, matvec_of(inv)};
  const SolveReport r = cg_solve(matvec_of(m), b, Vec(n, 0.0), cfg);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
}

TEST_CASE("MINRES solves indefinite systems") {
  const int n = 200;
  Eigen::VectorXd eigs(n);
  for (int i = 0; i < n; ++i) eigs(i) = (i % 2 ? -1.0 : 1.0) * (0.1 + 0.05 * i);
  const Eigen::MatrixXd m = random_symmetric_with_spectrum(eigs, 5);
  const Vec b = gaussian_vec(n, 6);
  const Eigen::VectorXd ref = m.fullPivLu().solve(to_eigen(b));
  SolveConfig cfg{4000, 1e-13, {}};
  const SolveReport r = minres_solve(matvec_of(m), b, Vec(n, 0.0), cfg);
  CHECK(r.converged);
  CHECK_FALSE(r.least_squares);
  CHECK((to_eigen(r.solution) - ref).norm() <= 1e-8 * ref.norm());
}

TEST_CASE("MINRES warm start and zero right-hand side") {
  const int n = 30;
  const Eigen::MatrixXd m = random_spd(n, 7, 1.0);
  const Vec b = gaussian_vec(n, 8);
  const Eigen::VectorXd ref = m.ldlt().solve(to_eigen(b));
  Vec x0(ref.data(), ref.data() + n);
  const SolveReport warm = minres_solve(matvec_of(m), b, x0, SolveConfig{100, 1e-10, {}});
  CHECK(warm.converged);
  CHECK(warm.iterations <= 1);
  const SolveReport zero = minres_solve(matvec_of(m), Vec(n, 0.0), Vec(n, 0.0), SolveConfig{});
  CHECK(zero.converged);
  CHECK(testing::max_abs_diff(zero.solution, Vec(n, 0.0)) == 0.0);
}

TEST_CASE("MINRES least-squares stop on an incompatible singular system") {
  const int n = 60;
  Eigen::VectorXd eigs(n);
  for (int i = 0; i < n; ++i) eigs(i) = i < 3 ? 0.0 : 0.5 + 0.1 * i;
  const Eigen::MatrixXd m = random_symmetric_with_spectrum(eigs, 9);
  const Vec b = gaussian_vec(n, 10);  // has a null-space component
  SolveConfig cfg{1000, 1e-10, {}, 1e-8};
  const SolveReport r = minres_solve(matvec_of(m), b, Vec(n, 0.0), cfg);
  CHECK(r.least_squares);
  CHECK(r.converged);
  // The least-squares solution satisfies M^T (b - M x) ~ 0; compare against
  // the pseudo-inverse solution on the range of M.
  const Eigen::VectorXd res = to_eigen(b) - m * to_eigen(r.solution);
  CHECK((m * res).norm() <= 1e-6 * m.norm() * res.norm());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  const Eigen::VectorXd pinv = svd.solve(to_eigen(b));
  CHECK((m * (to_eigen(r.solution) - pinv)).norm() <= 1e-6 * (m * pinv).norm());
  SolveConfig plain{1000, 1e-10, {}, 0.0};
  CHECK_FALSE(minres_solve(matvec_of(m), b, Vec(n, 0.0), plain).converged);
}

TEST_CASE("Lanczos extreme eigenvalues match a dense eigensolver") {
  for (int n : {50, 150, 300}) {
    CAPTURE(n);
    const Eigen::MatrixXd m = random_spd(n, static_cast<std::uint64_t>(n), 0.01);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const LanczosResult r = lanczos_extreme_eigs(matvec_of(m), n, n, 3);
    CHECK(std::abs(r.lambda_min - es.eigenvalues()(0)) <= 1e-3);
    CHECK(std::abs(r.lambda_max - es.eigenvalues()(n - 1)) <= 1e-3);
    CHECK(r.residual_min <= 1e-3);
  }
}

TEST_CASE("Lanczos stops early on a small invariant subspace") {
  const Eigen::VectorXd eigs = (Eigen::VectorXd(6) << 2, 2, 2, 5, 5, 5).finished();
  const Eigen::MatrixXd m = random_symmetric_with_spectrum(eigs, 11);
  const LanczosResult r = lanczos_extreme_eigs(matvec_of(m), 6, 6, 1);
  CHECK(r.early_exit);
  CHECK(r.iterations == 2);
  CHECK(r.lambda_min == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(r.lambda_max == doctest::Approx(5.0).epsilon(1e-10));
}
