#include "lirls/priors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lirls/error.hpp"

namespace lirls {

namespace {

constexpr double kEigFloor = 1e-300;
// Eigenvalue gaps below this (relative to lambda + gamma) use the averaged
// derivative instead of the divided difference.
constexpr double kGapGuard = 1e-8;

void check_weights(std::span<const double> w) {
  for (double v : w) require(v >= 0.0 && std::isfinite(v), ErrorCode::kDomain,
                             "prior: weights must be finite and non-negative");
}

void check_ascending(std::span<const double> w) {
  for (std::size_t j = 1; j < w.size(); ++j)
    require(w[j] >= w[j - 1], ErrorCode::kDomain, "prior: low-rank weights must be ascending");
}

// Eigenvalues of Z Z^T (descending, clamped at zero) and eigenvectors.
SymmetricEig gram_eig(const Matrix& z) {
  Matrix s(z.rows, z.rows);
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < z.cols; ++k) acc += z(i, k) * z(j, k);
      s(i, j) = s(j, i) = acc;
    }
  SymmetricEig e = symmetric_eig_small(s);
  for (auto& v : e.values) v = std::max(v, 0.0);
  return e;
}

double trace_xt_w_x(const Matrix& x, const Matrix& w) {
  double t = 0.0;
  for (std::size_t k = 0; k < x.cols; ++k)
    for (std::size_t i = 0; i < x.rows; ++i) {
      double wx = 0.0;
      for (std::size_t j = 0; j < x.rows; ++j) wx += w(i, j) * x(j, k);
      t += x(i, k) * wx;
    }
  return t;
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, ErrorCode::kDimension, "matrix product shape mismatch");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double v = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += v * b(k, j);
    }
  return c;
}

SymmetricEig symmetric_eig_small(const Matrix& s) {
  const std::size_t n = s.rows;
  require(n == s.cols && n >= 1 && n <= 4, ErrorCode::kDimension,
          "symmetric_eig_small: expects a square matrix up to 4x4");
  double scale = 0.0;
  for (double v : s.data) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      require(std::abs(s(i, j) - s(j, i)) <= 1e-12 * std::max(scale, 1.0), ErrorCode::kDomain,
              "symmetric_eig_small: matrix is not symmetric");

  Matrix a = s, v = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i) = 0.5 * (s(i, j) + s(j, i));

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Skip rotations that cannot change the diagonal in floating point.
        if (sweep > 4 && std::abs(apq) < 1e-300 + 1e-18 * (std::abs(a(p, p)) + std::abs(a(q, q)))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEig out{Matrix(n, n), Vec(n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v(k, order[j]);
  }
  return out;
}

PriorFamily parse_family(const std::string& s) {
  if (s == "sparse") return PriorFamily::kSparse;
  if (s == "low_rank" || s == "lowrank" || s == "low-rank") return PriorFamily::kLowRank;
  fail(ErrorCode::kConfig, "unknown prior family '" + s + "' (sparse|low_rank)");
}

std::string to_string(PriorFamily f) { return f == PriorFamily::kSparse ? "sparse" : "low_rank"; }

WeightProvider parse_provider(const std::string& s) {
  if (s == "fixed" || s == "fixed-ones") return WeightProvider::kFixedOnes;
  if (s == "global" || s == "global-learned") return WeightProvider::kGlobalLearned;
  if (s == "file" || s == "file-loaded") return WeightProvider::kFileLoaded;
  fail(ErrorCode::kConfig, "unknown weight provider '" + s + "' (fixed|global|file)");
}

std::string to_string(WeightProvider w) {
  switch (w) {
    case WeightProvider::kFixedOnes: return "fixed";
    case WeightProvider::kGlobalLearned: return "global";
    case WeightProvider::kFileLoaded: return "file";
  }
  return "fixed";
}

double p_from_raw(double raw) {
  return kLearnedPMin + (kLearnedPMax - kLearnedPMin) / (1.0 + std::exp(-raw));
}

double dp_draw(double raw) {
  const double s = 1.0 / (1.0 + std::exp(-raw));
  return (kLearnedPMax - kLearnedPMin) * s * (1.0 - s);
}

double raw_from_p(double p) {
  require(p > kLearnedPMin && p < kLearnedPMax, ErrorCode::kDomain,
          "learnable p must lie strictly inside (0.4, 0.9)");
  const double s = (p - kLearnedPMin) / (kLearnedPMax - kLearnedPMin);
  return std::log(s / (1.0 - s));
}

std::size_t PriorSpec::weight_count(PriorFamily family, std::size_t group_dim,
                                    std::size_t channels) {
  return family == PriorFamily::kSparse ? group_dim : channels;
}

PriorSpec PriorSpec::fixed(PriorFamily family, double p, double gamma, std::size_t weight_len,
                           double scale) {
  PriorSpec s;
  s.family = family;
  s.p = p;
  s.gamma = gamma;
  s.provider = WeightProvider::kFixedOnes;
  s.weights.assign(weight_len, scale);
  return s;
}

void PriorSpec::validate(std::size_t weight_len, std::size_t positions) const {
  require(p > 0.0 && p <= 1.0, ErrorCode::kDomain, "prior: p must lie in (0, 1]");
  require(gamma > 0.0, ErrorCode::kDomain, "prior: gamma must be > 0");
  if (provider == WeightProvider::kFileLoaded) {
    require(weight_map.planes == weight_len && weight_map.positions() == positions,
            ErrorCode::kDimension,
            "prior: weight map has " + std::to_string(weight_map.planes) + " planes over " +
                std::to_string(weight_map.positions()) + " positions, expected " +
                std::to_string(weight_len) + " over " + std::to_string(positions));
    check_weights(weight_map.data);
    if (family == PriorFamily::kLowRank)
      for (std::size_t i = 0; i < positions; ++i)
        for (std::size_t j = 1; j < weight_len; ++j)
          require(weight_map.at(j, i) >= weight_map.at(j - 1, i), ErrorCode::kDomain,
                  "prior: low-rank weight map must be ascending per position");
  } else {
    require(weights.size() == weight_len, ErrorCode::kDimension,
            "prior: expected " + std::to_string(weight_len) + " weights, got " +
                std::to_string(weights.size()));
    check_weights(weights);
    if (family == PriorFamily::kLowRank) check_ascending(weights);
  }
}

double phi_sparse(std::span<const double> z, std::span<const double> w, double p, double gamma) {
  require(z.size() == w.size(), ErrorCode::kDimension, "phi_sparse: z and w differ in length");
  check_weights(w);
  require(gamma >= 0.0, ErrorCode::kDomain, "phi_sparse: gamma must be >= 0");
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) s += w[j] * std::pow(z[j] * z[j] + gamma, 0.5 * p);
  return s;
}

double phi_lowrank(const Matrix& z, std::span<const double> w, double p, double gamma) {
  const std::size_t r = std::min(z.rows, z.cols);
  require(w.size() == r, ErrorCode::kDimension, "phi_lowrank: need min(c, q) weights");
  check_weights(w);
  check_ascending(w);
  require(gamma >= 0.0, ErrorCode::kDomain, "phi_lowrank: gamma must be >= 0");
  // The nonzero spectrum of Z Z^T or Z^T Z, whichever is smaller.
  const Matrix m = z.rows <= z.cols ? z : z.transpose();
  const SymmetricEig e = gram_eig(m);
  double s = 0.0;
  for (std::size_t j = 0; j < r; ++j) s += w[j] * std::pow(e.values[j] + gamma, 0.5 * p);
  return s;
}

Vec sparse_weights(std::span<const double> z, std::span<const double> w, double p, double gamma) {
  require(z.size() == w.size(), ErrorCode::kDimension, "sparse_weights: size mismatch");
  require(gamma > 0.0, ErrorCode::kDomain, "sparse_weights: gamma must be > 0");
  check_weights(w);
  Vec out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j)
    out[j] = w[j] * std::pow(z[j] * z[j] + gamma, 0.5 * (p - 2.0));
  return out;
}

Matrix lowrank_weights(const Matrix& z, std::span<const double> w, double p, double gamma) {
  require(gamma > 0.0, ErrorCode::kDomain, "lowrank_weights: gamma must be > 0");
  require(z.rows <= z.cols, ErrorCode::kDimension,
          "lowrank_weights: needs at least as many columns as rows");
  require(w.size() == z.rows, ErrorCode::kDimension, "lowrank_weights: need one weight per row");
  check_weights(w);
  check_ascending(w);
  const SymmetricEig e = gram_eig(z);
  const std::size_t c = z.rows;
  Matrix out(c, c);
  for (std::size_t j = 0; j < c; ++j) {
    const double h = w[j] * std::pow(std::max(e.values[j] + gamma, kEigFloor), 0.5 * (p - 2.0));
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b < c; ++b) out(a, b) += h * e.vectors(a, j) * e.vectors(b, j);
  }
  return out;
}

double majorizer_gap_sparse(std::span<const double> x, std::span<const double> y,
                            std::span<const double> w, double p, double gamma) {
  require(x.size() == y.size(), ErrorCode::kDimension, "majorizer_gap_sparse: size mismatch");
  const Vec wy = sparse_weights(y, w, p, gamma);
  double qx = 0.0, qy = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    qx += wy[j] * x[j] * x[j];
    qy += wy[j] * y[j] * y[j];
  }
  const double rhs = phi_sparse(y, w, p, gamma) + 0.5 * p * qx - 0.5 * p * qy;
  return rhs - phi_sparse(x, w, p, gamma);
}

double majorizer_gap_lowrank(const Matrix& x, const Matrix& y, std::span<const double> w,
                             double p, double gamma) {
  require(x.rows == y.rows && x.cols == y.cols, ErrorCode::kDimension,
          "majorizer_gap_lowrank: shape mismatch");
  const Matrix wy = lowrank_weights(y, w, p, gamma);
  const double rhs = phi_lowrank(y, w, p, gamma) + 0.5 * p * trace_xt_w_x(x, wy) -
                     0.5 * p * trace_xt_w_x(y, wy);
  return rhs - phi_lowrank(x, w, p, gamma);
}

// ---- PriorField -------------------------------------------------------------

PriorField::PriorField(const PriorSpec& spec, const Features& z, std::size_t channels,
                       bool with_hessian)
    : spec_(spec), z_(z), channels_(channels), with_hessian_(with_hessian) {
  const std::size_t P = z_.positions();
  const double p = spec_.p, gamma = spec_.gamma;
  if (spec_.family == PriorFamily::kSparse) {
    dim_ = z_.planes;
    wlen_ = dim_;
    spec_.validate(wlen_, P);
    weights_.resize(z_.data.size());
    if (with_hessian_) hess_.resize(z_.data.size());
    long double total = 0.0L;
    for (std::size_t j = 0; j < dim_; ++j)
      for (std::size_t i = 0; i < P; ++i) {
        const double zz = z_.at(j, i);
        const double w = spec_.weight(i, j);
        const double base = zz * zz + gamma;
        const double pw = std::pow(base, 0.5 * (p - 2.0));
        total += w * pw * base;  // w (z^2 + gamma)^{p/2}
        weights_[j * P + i] = w * pw;
        if (with_hessian_) hess_[j * P + i] = p * w * pw / base * ((p - 1.0) * zz * zz + gamma);
      }
    value_ = static_cast<double>(total);
  } else {
    require(z_.planes % channels_ == 0, ErrorCode::kDimension, "prior: bad low-rank layout");
    dim_ = z_.planes / channels_;
    require(dim_ >= channels_, ErrorCode::kDimension,
            "prior: low-rank mode needs at least as many filters as channels");
    wlen_ = channels_;
    spec_.validate(wlen_, P);
    const std::size_t c = channels_;
    weights_.assign(P * c * c, 0.0);
    eigvecs_.resize(P * c * c);
    eigvals_.resize(P * c);
    long double total = 0.0L;
    for (std::size_t i = 0; i < P; ++i) {
      const Matrix zi = group_matrix(z_, i);
      const SymmetricEig e = gram_eig(zi);
      double* W = weights_.data() + i * c * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double base = std::max(e.values[j] + gamma, kEigFloor);
        const double w = spec_.weight(i, j);
        const double h = w * std::pow(base, 0.5 * (p - 2.0));
        total += h * base;
        eigvals_[i * c + j] = e.values[j];
        for (std::size_t a = 0; a < c; ++a) {
          eigvecs_[(i * c + a) * c + j] = e.vectors(a, j);
          for (std::size_t b = 0; b < c; ++b) W[a * c + b] += h * e.vectors(a, j) * e.vectors(b, j);
        }
      }
    }
    value_ = static_cast<double>(total);
  }
}

Matrix PriorField::group_matrix(const Features& f, std::size_t group) const {
  Matrix m(channels_, dim_);
  for (std::size_t ch = 0; ch < channels_; ++ch)
    for (std::size_t k = 0; k < dim_; ++k) m(ch, k) = f.at(ch * dim_ + k, group);
  return m;
}

void PriorField::apply_weights(const Features& dz, Features& out) const {
  require(dz.data.size() == z_.data.size(), ErrorCode::kDimension,
          "prior: feature size mismatch");
  out.planes = dz.planes;
  out.height = dz.height;
  out.width = dz.width;
  out.data.resize(dz.data.size());
  if (spec_.family == PriorFamily::kSparse) {
    for (std::size_t k = 0; k < dz.data.size(); ++k) out.data[k] = weights_[k] * dz.data[k];
    return;
  }
  const std::size_t P = z_.positions(), c = channels_, q = dim_;
  for (std::size_t i = 0; i < P; ++i) {
    const double* W = weights_.data() + i * c * c;
    for (std::size_t k = 0; k < q; ++k)
      for (std::size_t a = 0; a < c; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < c; ++b) s += W[a * c + b] * dz.data[(b * q + k) * P + i];
        out.data[(a * q + k) * P + i] = s;
      }
  }
}

Features PriorField::gradient() const {
  Features g;
  apply_weights(z_, g);
  for (auto& v : g.data) v *= spec_.p;
  return g;
}

void PriorField::apply_hessian(const Features& dz, Features& out) const {
  require(with_hessian_, ErrorCode::kDomain, "prior: field built without Hessian data");
  require(dz.data.size() == z_.data.size(), ErrorCode::kDimension,
          "prior: feature size mismatch");
  out.planes = dz.planes;
  out.height = dz.height;
  out.width = dz.width;
  out.data.resize(dz.data.size());
  if (spec_.family == PriorFamily::kSparse) {
    for (std::size_t k = 0; k < dz.data.size(); ++k) out.data[k] = hess_[k] * dz.data[k];
    return;
  }
  const std::size_t P = z_.positions(), c = channels_, q = dim_;
  const double p = spec_.p, gamma = spec_.gamma;
  Matrix gam(c, c), st(c, c), m(c, c), dw(c, c);
  for (std::size_t i = 0; i < P; ++i) {
    const double* U = eigvecs_.data() + i * c * c;
    const double* lam = eigvals_.data() + i * c;
    const double* W = weights_.data() + i * c * c;
    const Matrix zi = group_matrix(z_, i);
    const Matrix di = group_matrix(dz, i);
    // Divided differences of h(lambda) = w (lambda + gamma)^{(p-2)/2}.
    double h[4], dh[4];
    for (std::size_t j = 0; j < c; ++j) {
      const double base = std::max(lam[j] + gamma, kEigFloor);
      const double w = spec_.weight(i, j);
      h[j] = w * std::pow(base, 0.5 * (p - 2.0));
      dh[j] = 0.5 * (p - 2.0) * h[j] / base;
    }
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t k = 0; k < c; ++k) {
        if (j == k) {
          gam(j, k) = dh[j];
          continue;
        }
        const double gap = lam[j] - lam[k];
        const double ref = std::max(lam[j], lam[k]) + gamma;
        gam(j, k) = std::abs(gap) <= kGapGuard * ref ? 0.5 * (dh[j] + dh[k]) : (h[j] - h[k]) / gap;
      }
    // dS = D Z^T + Z D^T, rotated into the eigenbasis.
    Matrix ds(c, c);
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b <= a; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < q; ++k) s += di(a, k) * zi(b, k) + zi(a, k) * di(b, k);
        ds(a, b) = ds(b, a) = s;
      }
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t k = 0; k < c; ++k) {
        double s = 0.0;
        for (std::size_t a = 0; a < c; ++a)
          for (std::size_t b = 0; b < c; ++b) s += U[a * c + j] * ds(a, b) * U[b * c + k];
        m(j, k) = s * gam(j, k);
      }
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b < c; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j)
          for (std::size_t k = 0; k < c; ++k) s += U[a * c + j] * m(j, k) * U[b * c + k];
        dw(a, b) = s;
      }
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t k = 0; k < q; ++k) {
        double s = 0.0;
        for (std::size_t b = 0; b < c; ++b) s += dw(a, b) * zi(b, k) + W[a * c + b] * di(b, k);
        out.data[(a * q + k) * P + i] = p * s;
      }
  }
}

void PriorField::accumulate_weight_grad(const Features& v, double scale,
                                        std::span<double> dw) const {
  require(dw.size() == wlen_, ErrorCode::kDimension, "prior: weight gradient length mismatch");
  const std::size_t P = z_.positions();
  const double p = spec_.p, gamma = spec_.gamma;
  if (spec_.family == PriorFamily::kSparse) {
    for (std::size_t j = 0; j < dim_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < P; ++i) {
        const double zz = z_.at(j, i);
        s += p * zz * std::pow(zz * zz + gamma, 0.5 * (p - 2.0)) * v.at(j, i);
      }
      dw[j] += scale * s;
    }
    return;
  }
  const std::size_t c = channels_, q = dim_;
  for (std::size_t i = 0; i < P; ++i) {
    const double* U = eigvecs_.data() + i * c * c;
    const double* lam = eigvals_.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      // u_j^T Z V^T u_j
      double s = 0.0;
      for (std::size_t k = 0; k < q; ++k) {
        double uz = 0.0, uv = 0.0;
        for (std::size_t a = 0; a < c; ++a) {
          uz += U[a * c + j] * z_.at(a * q + k, i);
          uv += U[a * c + j] * v.at(a * q + k, i);
        }
        s += uz * uv;
      }
      const double base = std::max(lam[j] + gamma, kEigFloor);
      dw[j] += scale * p * std::pow(base, 0.5 * (p - 2.0)) * s;
    }
  }
}

double PriorField::p_grad(const Features& v) const {
  const std::size_t P = z_.positions();
  const double p = spec_.p, gamma = spec_.gamma;
  double total = 0.0;
  if (spec_.family == PriorFamily::kSparse) {
    for (std::size_t j = 0; j < dim_; ++j)
      for (std::size_t i = 0; i < P; ++i) {
        const double zz = z_.at(j, i);
        const double base = zz * zz + gamma;
        total += spec_.weight(i, j) * zz * std::pow(base, 0.5 * (p - 2.0)) *
                 (1.0 + 0.5 * p * std::log(base)) * v.at(j, i);
      }
    return total;
  }
  const std::size_t c = channels_, q = dim_;
  for (std::size_t i = 0; i < P; ++i) {
    const double* U = eigvecs_.data() + i * c * c;
    const double* lam = eigvals_.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < q; ++k) {
        double uz = 0.0, uv = 0.0;
        for (std::size_t a = 0; a < c; ++a) {
          uz += U[a * c + j] * z_.at(a * q + k, i);
          uv += U[a * c + j] * v.at(a * q + k, i);
        }
        s += uz * uv;
      }
      const double base = std::max(lam[j] + gamma, kEigFloor);
      total += spec_.weight(i, j) * std::pow(base, 0.5 * (p - 2.0)) *
               (1.0 + 0.5 * p * std::log(base)) * s;
    }
  }
  return total;
}

double PriorField::max_weight(std::size_t group) const {
  const std::size_t P = z_.positions();
  if (spec_.family == PriorFamily::kSparse) {
    double m = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) m = std::max(m, weights_[j * P + group]);
    return m;
  }
  // Eigenvalues of W_i are h_j; recover them from the stored spectrum.
  const std::size_t c = channels_;
  double m = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    const double base = std::max(eigvals_[group * c + j] + spec_.gamma, kEigFloor);
    m = std::max(m, spec_.weight(group, j) * std::pow(base, 0.5 * (spec_.p - 2.0)));
  }
  return m;
}

Vec PriorField::group_weights(std::size_t group) const {
  const std::size_t P = z_.positions();
  if (spec_.family == PriorFamily::kSparse) {
    Vec d(dim_);
    for (std::size_t j = 0; j < dim_; ++j) d[j] = weights_[j * P + group];
    return d;
  }
  const std::size_t c = channels_;
  return Vec(weights_.begin() + static_cast<std::ptrdiff_t>(group * c * c),
             weights_.begin() + static_cast<std::ptrdiff_t>((group + 1) * c * c));
}

}  // namespace lirls
