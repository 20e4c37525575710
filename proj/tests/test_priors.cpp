#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "lirls/error.hpp"
#include "lirls/priors.hpp"

using namespace lirls;
using testing::gaussian_vec;
using testing::uniform_vec;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  Matrix m(r, c);
  m.data = gaussian_vec(r * c, seed, scale);
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) e(i, j) = m(i, j);
  return e;
}

Vec ascending(Vec w) {
  std::sort(w.begin(), w.end());
  return w;
}

// Features with `planes` planes of `positions` entries each.
Features random_features(std::size_t planes, std::size_t h, std::size_t w, std::uint64_t seed) {
  Features z;
  z.planes = planes;
  z.height = h;
  z.width = w;
  z.data = gaussian_vec(planes * h * w, seed, 0.5);
  return z;
}

}  // namespace

TEST_CASE("potentials match frozen reference values") {
  // Reference values from tests/oracles/generate.py (numpy).
  const Vec z = {0.3, -1.2, 0.0, 2.5};
  const Vec w = {1.0, 0.5, 2.0, 1.5};
  CHECK(phi_sparse(z, w, 1.0, 1e-3) == doctest::Approx(4.7154159009612).epsilon(1e-14));
  CHECK(phi_sparse(z, w, 0.7, 1e-3) == doctest::Approx(4.0275077824192191).epsilon(1e-14));

  Matrix zm(3, 4);
  zm.data = {0.4, -0.2, 1.1, 0.0, 0.3, 0.8, -0.5, 0.25, -0.7, 0.1, 0.2, 0.9};
  const Vec wl = {0.5, 1.0, 2.0};
  CHECK(phi_lowrank(zm, wl, 1.0, 1e-3) == doctest::Approx(3.3977627604122755).epsilon(1e-13));
  CHECK(phi_lowrank(zm, wl, 0.6, 1e-3) == doctest::Approx(3.4158270050593122).epsilon(1e-13));
}

TEST_CASE("small symmetric eigensolver agrees with Eigen") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t n = 1 + seed % 4;
    const Matrix a = random_matrix(n, n, seed);
    Matrix s = a * a.transpose();
    for (std::size_t i = 0; i < n; ++i) s(i, i) -= 0.5;
    const SymmetricEig eig = symmetric_eig_small(s);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(s));
    for (std::size_t i = 0; i < n; ++i)
      CHECK(eig.values[i] == doctest::Approx(ref.eigenvalues()(n - 1 - i)).epsilon(1e-12));
    // V diag(values) V^T reproduces s.
    Eigen::MatrixXd v = to_eigen(eig.vectors);
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(eig.values.data(), n);
    CHECK((v * d.asDiagonal() * v.transpose() - to_eigen(s)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("low-rank weight matrix matches its SVD form") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix z = random_matrix(3, 8, seed);
    const Vec w = ascending(uniform_vec(3, seed + 100, 0.2, 2.0));
    const double p = 0.5 + 0.05 * static_cast<double>(seed), gamma = 1e-3;
    const Matrix wm = lowrank_weights(z, w, p, gamma);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(z), Eigen::ComputeFullU);
    Eigen::VectorXd diag(3);
    for (int j = 0; j < 3; ++j) {
      const double s = svd.singularValues()(j);
      diag(j) = w[j] * std::pow(s * s + gamma, (p - 2.0) / 2.0);
    }
    const Eigen::MatrixXd ref = svd.matrixU() * diag.asDiagonal() * svd.matrixU().transpose();
    CHECK((to_eigen(wm) - ref).cwiseAbs().maxCoeff() < 1e-10 * ref.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("sparse weights are the closed-form diagonal") {
  const Vec z = {0.5, -2.0, 0.0};
  const Vec w = {1.0, 2.0, 3.0};
  const Vec d = sparse_weights(z, w, 0.8, 0.01);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(d[j] == doctest::Approx(w[j] * std::pow(z[j] * z[j] + 0.01, -0.6)).epsilon(1e-14));
}

TEST_CASE("majorizer gaps are non-negative and vanish at the anchor") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> up(0.3, 1.0), ug(1e-6, 1e-1), us(0.01, 10.0);
  double worst_sparse = 1.0, worst_lowrank = 1.0, anchor = 0.0;
  for (int t = 0; t < 500; ++t) {
    const double p = up(rng), gamma = ug(rng), scale = us(rng);
    const Vec x = gaussian_vec(9, 3 * t + 1, scale), y = gaussian_vec(9, 3 * t + 2, scale);
    const Vec w = uniform_vec(9, 3 * t + 3, 0.0, 3.0);
    worst_sparse = std::min(worst_sparse, majorizer_gap_sparse(x, y, w, p, gamma));
    anchor = std::max(anchor, std::abs(majorizer_gap_sparse(y, y, w, p, gamma)));

    const Matrix xm = random_matrix(3, 5, 7 * t + 1, scale), ym = random_matrix(3, 5, 7 * t + 2, scale);
    const Vec wl = ascending(uniform_vec(3, 7 * t + 3, 0.0, 3.0));
    worst_lowrank = std::min(worst_lowrank, majorizer_gap_lowrank(xm, ym, wl, p, gamma));
    anchor = std::max(anchor, std::abs(majorizer_gap_lowrank(ym, ym, wl, p, gamma)));
  }
  CHECK(worst_sparse >= -1e-12);
  CHECK(worst_lowrank >= -1e-12);
  CHECK(anchor <= 1e-12);
}

TEST_CASE("descending low-rank weights are rejected") {
  const Matrix x = random_matrix(3, 4, 1), y = random_matrix(3, 4, 2);
  CHECK_THROWS_AS(majorizer_gap_lowrank(x, y, Vec{3.0, 1.0, 0.1}, 1.0, 1e-4), Error);
  CHECK_THROWS_AS(lowrank_weights(y, Vec{3.0, 1.0, 0.1}, 1.0, 1e-4), Error);
}

TEST_CASE("p reparameterisation") {
  CHECK(p_from_raw(0.0) == doctest::Approx(0.65));
  CHECK(p_from_raw(raw_from_p(0.8)) == doctest::Approx(0.8).epsilon(1e-14));
  const double r = 0.3, h = 1e-6;
  CHECK(dp_draw(r) == doctest::Approx((p_from_raw(r + h) - p_from_raw(r - h)) / (2 * h)).epsilon(1e-8));
  CHECK_THROWS_AS(raw_from_p(0.95), Error);
  CHECK(p_from_raw(-50.0) >= kLearnedPMin);
  CHECK(p_from_raw(50.0) <= kLearnedPMax);
}

TEST_CASE("parsers") {
  CHECK(parse_family("sparse") == PriorFamily::kSparse);
  CHECK(parse_family("lowrank") == PriorFamily::kLowRank);
  CHECK_THROWS_AS(parse_family("dense"), Error);
  CHECK(parse_provider("global") == WeightProvider::kGlobalLearned);
  CHECK(to_string(parse_provider("file")) == "file");
}

TEST_CASE("prior field gradient and Hessian agree with finite differences") {
  struct Case {
    PriorFamily family;
    std::size_t planes;
    std::size_t channels;
    double p;
  };
  for (const Case c : {Case{PriorFamily::kSparse, 4, 3, 1.0}, Case{PriorFamily::kSparse, 4, 3, 0.6},
                       Case{PriorFamily::kLowRank, 9, 3, 1.0}, Case{PriorFamily::kLowRank, 12, 3, 0.7}}) {
    CAPTURE(c.p);
    const std::size_t wlen = c.family == PriorFamily::kSparse ? c.planes : c.channels;
    PriorSpec spec = PriorSpec::fixed(c.family, c.p, 1e-2, wlen);
    spec.weights = ascending(uniform_vec(wlen, 5, 0.5, 1.5));
    const Features z = random_features(c.planes, 3, 4, 9);
    const PriorField field(spec, z, c.channels, true);
    const Features grad = field.gradient();
    const Features dir = random_features(c.planes, 3, 4, 10);
    const double h = 1e-6;
    Features zp = z, zm = z;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      zp.data[i] += h * dir.data[i];
      zm.data[i] -= h * dir.data[i];
    }
    const PriorField fp(spec, zp, c.channels, true), fm(spec, zm, c.channels, true);
    const double fd = (fp.value() - fm.value()) / (2 * h);
    CHECK(dot(grad.data, dir.data) == doctest::Approx(fd).epsilon(1e-7));

    Features hv = z;
    field.apply_hessian(dir, hv);
    const Features gp = fp.gradient(), gm = fm.gradient();
    Vec fd_h(z.data.size());
    for (std::size_t i = 0; i < fd_h.size(); ++i) fd_h[i] = (gp.data[i] - gm.data[i]) / (2 * h);
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < fd_h.size(); ++i) {
      err = std::max(err, std::abs(fd_h[i] - hv.data[i]));
      ref = std::max(ref, std::abs(fd_h[i]));
    }
    CHECK(err <= 1e-5 * ref);
  }
}

TEST_CASE("weight and p derivatives agree with finite differences") {
  for (PriorFamily family : {PriorFamily::kSparse, PriorFamily::kLowRank}) {
    const std::size_t planes = family == PriorFamily::kSparse ? 5 : 9;
    const std::size_t wlen = family == PriorFamily::kSparse ? 5 : 3;
    PriorSpec spec = PriorSpec::fixed(family, 0.75, 1e-2, wlen);
    spec.provider = WeightProvider::kGlobalLearned;
    spec.weights = ascending(uniform_vec(wlen, 17, 0.5, 1.5));
    const Features z = random_features(planes, 3, 3, 2);
    const Features v = random_features(planes, 3, 3, 3);
    const PriorField field(spec, z, 3);
    Vec dw(wlen, 0.0);
    field.accumulate_weight_grad(v, 1.0, dw);
    auto pairing = [&](const PriorSpec& s) { return dot(PriorField(s, z, 3).gradient().data, v.data); };
    const double h = 1e-6;
    for (std::size_t j = 0; j < wlen; ++j) {
      PriorSpec sp = spec, sm = spec;
      sp.weights[j] += h;
      sm.weights[j] -= h;
      CHECK(dw[j] == doctest::Approx((pairing(sp) - pairing(sm)) / (2 * h)).epsilon(1e-6));
    }
    PriorSpec sp = spec, sm = spec;
    sp.p += h;
    sm.p -= h;
    CHECK(field.p_grad(v) == doctest::Approx((pairing(sp) - pairing(sm)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("prior spec validation") {
  PriorSpec spec = PriorSpec::fixed(PriorFamily::kSparse, 1.0, 1e-4, 4);
  CHECK_NOTHROW(spec.validate(4, 10));
  CHECK_THROWS_AS(spec.validate(5, 10), Error);
  spec.weights[1] = -1.0;
  CHECK_THROWS_AS(spec.validate(4, 10), Error);
}
