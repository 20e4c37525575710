#pragma once

#include <span>
#include <string>

#include "lirls/image.hpp"
#include "lirls/operators.hpp"

namespace lirls {

// Small dense row-major matrix for per-group algebra (c x q, c x c).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::size_t n);
  Matrix transpose() const;
};

Matrix operator*(const Matrix& a, const Matrix& b);

struct SymmetricEig {
  Matrix vectors;  // columns are eigenvectors
  Vec values;      // descending
};

// Cyclic Jacobi for symmetric matrices up to 4x4.
SymmetricEig symmetric_eig_small(const Matrix& s);

enum class PriorFamily { kSparse, kLowRank };

enum class WeightProvider {
  kFixedOnes,      // w = scale * 1, not learnable
  kGlobalLearned,  // one w_j per filter (sparse) or singular index (low-rank)
  kFileLoaded,     // per-position map
};

PriorFamily parse_family(const std::string& s);
std::string to_string(PriorFamily f);
WeightProvider parse_provider(const std::string& s);
std::string to_string(WeightProvider w);

inline FeatureMode feature_mode(PriorFamily f) {
  return f == PriorFamily::kSparse ? FeatureMode::kSparse : FeatureMode::kLowRank;
}

// Learnable p lives in [0.4, 0.9] through a logistic map of a raw scalar.
inline constexpr double kLearnedPMin = 0.4;
inline constexpr double kLearnedPMax = 0.9;
double p_from_raw(double raw);
double dp_draw(double raw);
double raw_from_p(double p);

struct PriorSpec {
  PriorFamily family = PriorFamily::kSparse;
  double p = 1.0;
  double gamma = 1e-4;
  WeightProvider provider = WeightProvider::kFixedOnes;
  // Fixed-ones and global providers: one entry per group component (sparse,
  // length d) or singular index (low-rank, length r, ascending).
  Vec weights;
  // File-loaded provider: planes = d (sparse) or r (low-rank) over the valid
  // positions of the analysis output.
  Features weight_map;

  FeatureMode mode() const { return feature_mode(family); }
  // Weight count per group: d for sparse, r = channels for low-rank.
  static std::size_t weight_count(PriorFamily family, std::size_t group_dim, std::size_t channels);
  // Check shapes against an analysis layout; throws on mismatch.
  void validate(std::size_t weight_len, std::size_t positions) const;
  double weight(std::size_t group, std::size_t j) const {
    return provider == WeightProvider::kFileLoaded ? weight_map.at(j, group) : weights[j];
  }

  // Fixed weights equal to `scale` everywhere.
  static PriorSpec fixed(PriorFamily family, double p, double gamma, std::size_t weight_len,
                         double scale = 1.0);
};

// ---- single-group potentials and majorizer weights ----------------------

// sum_j w_j (z_j^2 + gamma)^{p/2}
double phi_sparse(std::span<const double> z, std::span<const double> w, double p, double gamma);
// sum_j w_j (sigma_j^2(Z) + gamma)^{p/2}, sigma descending, w ascending.
double phi_lowrank(const Matrix& z, std::span<const double> w, double p, double gamma);

// Diagonal of W_z: w_j (z_j^2 + gamma)^{(p-2)/2}.
Vec sparse_weights(std::span<const double> z, std::span<const double> w, double p, double gamma);
// W_Z = U diag(w) U^T (Z Z^T + gamma I)^{(p-2)/2}, c x c, symmetric.
Matrix lowrank_weights(const Matrix& z, std::span<const double> w, double p, double gamma);

// RHS - LHS of the quadratic upper bound at x around y.
double majorizer_gap_sparse(std::span<const double> x, std::span<const double> y,
                            std::span<const double> w, double p, double gamma);
double majorizer_gap_lowrank(const Matrix& x, const Matrix& y, std::span<const double> w,
                             double p, double gamma);

// ---- whole-field prior state at one iterate ------------------------------

// Per-group quantities of the prior evaluated at features z: potential
// value, majorizer weights W_i, gradient, Hessian action and parameter
// derivatives. Built once per IRLS iterate.
class PriorField {
 public:
  PriorField(const PriorSpec& spec, const Features& z, std::size_t channels,
             bool with_hessian = false);

  double value() const { return value_; }
  const PriorSpec& spec() const { return spec_; }
  std::size_t groups() const { return z_.positions(); }

  // out_i = W_i dz_i (for low-rank, W applied to every column of dZ_i).
  void apply_weights(const Features& dz, Features& out) const;
  // grad_i = p W_i z_i, the gradient of phi at z_i.
  Features gradient() const;
  // out_i = Hess phi(z_i)[dz_i]. Requires with_hessian.
  void apply_hessian(const Features& dz, Features& out) const;

  // d/dw_j of sum_i <v_i, grad phi(z_i)> for global weights, accumulated.
  void accumulate_weight_grad(const Features& v, double scale, std::span<double> dw) const;
  // d/dp of sum_i <v_i, grad phi(z_i)>.
  double p_grad(const Features& v) const;

  // lambda_max(W_i) for group i.
  double max_weight(std::size_t group) const;
  // Entries of W_i: diagonal (sparse, length d) or c x c (low-rank).
  Vec group_weights(std::size_t group) const;

 private:
  Matrix group_matrix(const Features& f, std::size_t group) const;

  PriorSpec spec_;
  Features z_;
  std::size_t channels_;
  std::size_t dim_;       // d (sparse) or q = filters (low-rank)
  std::size_t wlen_;      // weight count per group
  bool with_hessian_;
  double value_ = 0.0;
  Vec weights_;           // sparse: plane layout like z; low-rank: groups * c*c
  Vec hess_;              // sparse: diagonal Hessian per entry
  Vec eigvecs_;           // low-rank: groups * c*c (columns eigenvectors)
  Vec eigvals_;           // low-rank: groups * c (descending)
};

}  // namespace lirls
