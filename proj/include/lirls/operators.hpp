#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>

#include "lirls/image.hpp"

namespace lirls {

// Matrix-free linear map between planar tensors. `apply` and `adjoint`
// overwrite their output.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Dims input_dims() const = 0;
  virtual Dims output_dims() const = 0;
  virtual std::string name() const = 0;

  Vec apply(std::span<const double> x) const;
  Vec adjoint(std::span<const double> u) const;
  void apply(std::span<const double> x, std::span<double> out) const;
  void adjoint(std::span<const double> u, std::span<double> out) const;

 protected:
  virtual void do_apply(std::span<const double> x, std::span<double> out) const = 0;
  virtual void do_adjoint(std::span<const double> u, std::span<double> out) const = 0;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

struct Kernel {
  std::size_t height = 0;
  std::size_t width = 0;
  Vec taps;  // row-major

  double at(std::size_t y, std::size_t x) const { return taps[y * width + x]; }
  double sum() const;
};

// Plain-text matrix (rows of whitespace separated numbers) or PFM.
Kernel load_kernel(const std::filesystem::path& path);
void save_kernel_text(const Kernel& k, const std::filesystem::path& path);
Kernel delta_kernel();

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Dims dims) : dims_(dims) {}
  Dims input_dims() const override { return dims_; }
  Dims output_dims() const override { return dims_; }
  std::string name() const override { return "identity"; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override;
  void do_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  Dims dims_;
};

// Valid 2-D convolution applied identically to every channel.
class BlurOperator : public LinearOperator {
 public:
  BlurOperator(Kernel kernel, Dims input);
  Dims input_dims() const override { return input_; }
  Dims output_dims() const override { return output_; }
  std::string name() const override { return "blur"; }
  const Kernel& kernel() const { return kernel_; }

  // Input dims whose valid output has the given observation dims.
  static Dims input_for(const Kernel& kernel, Dims observed);

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override;
  void do_adjoint(std::span<const double> u, std::span<double> out) const override;
  void correlate_back(const Kernel& k, std::span<const double> u, std::span<double> out) const;

  Kernel kernel_;
  Dims input_;
  Dims output_;
};

// Blur whose adjoint uses the transposed kernel. Deliberately wrong for any
// non-symmetric kernel; exists to exercise the adjoint diagnostics.
class MutatedBlurOperator final : public BlurOperator {
 public:
  MutatedBlurOperator(Kernel kernel, Dims input);
  std::string name() const override { return "blur(mutated-adjoint)"; }

 protected:
  void do_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  Kernel transposed_;
};

// Valid blur followed by decimation by `scale` at phase 0.
class SrOperator final : public LinearOperator {
 public:
  SrOperator(Kernel kernel, std::size_t scale, Dims input);
  Dims input_dims() const override { return blur_.input_dims(); }
  Dims output_dims() const override { return output_; }
  std::string name() const override { return "sr"; }
  std::size_t scale() const { return scale_; }
  const Kernel& kernel() const { return blur_.kernel(); }

  static Dims input_for(const Kernel& kernel, std::size_t scale, Dims observed);

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override;
  void do_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  BlurOperator blur_;
  std::size_t scale_;
  Dims output_;
};

// Bayer mosaic: one channel sampled per pixel, single-channel output.
class CfaOperator final : public LinearOperator {
 public:
  CfaOperator(const std::string& pattern, std::size_t height, std::size_t width);
  Dims input_dims() const override { return {3, height_, width_}; }
  Dims output_dims() const override { return {1, height_, width_}; }
  std::string name() const override { return "cfa"; }
  std::size_t channel_at(std::size_t y, std::size_t x) const {
    return layout_[(y % 2) * 2 + (x % 2)];
  }
  const std::string& pattern() const { return pattern_; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override;
  void do_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  std::string pattern_;
  std::size_t layout_[4];
  std::size_t height_, width_;
};

// outer(inner(x))
class ComposedOperator final : public LinearOperator {
 public:
  ComposedOperator(OperatorPtr outer, OperatorPtr inner);
  Dims input_dims() const override { return inner_->input_dims(); }
  Dims output_dims() const override { return outer_->output_dims(); }
  std::string name() const override { return outer_->name() + "*" + inner_->name(); }

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override;
  void do_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  OperatorPtr outer_, inner_;
};

enum class FeatureMode { kSparse, kLowRank };

// Analysis-domain features laid out as planes over valid positions. Group i
// is spatial position i. Sparse mode: plane f holds filter f, so group i is
// the vector over filters. Low-rank mode: plane (ch * filters + f) holds
// filter f applied to channel ch, so group i is the channels x filters
// matrix Z_i.
struct Features {
  std::size_t planes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  Vec data;

  std::size_t positions() const { return height * width; }
  double& at(std::size_t plane, std::size_t pos) { return data[plane * positions() + pos]; }
  double at(std::size_t plane, std::size_t pos) const { return data[plane * positions() + pos]; }
};

// Bank of valid-correlation filters, each c_in x k_h x k_w. Sparse mode
// mixes channels (c_in equals the image channels); low-rank mode applies each
// single-channel filter (c_in = 1) to every image channel.
class FilterBank {
 public:
  FilterBank() = default;
  FilterBank(std::size_t filters, std::size_t c_in, std::size_t kh, std::size_t kw, Vec coeffs);

  std::size_t filters() const { return filters_; }
  std::size_t c_in() const { return c_in_; }
  std::size_t kh() const { return kh_; }
  std::size_t kw() const { return kw_; }
  const Vec& coeffs() const { return coeffs_; }
  Vec& coeffs() { return coeffs_; }
  double at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const {
    return coeffs_[((f * c_in_ + c) * kh_ + y) * kw_ + x];
  }

  // Dimension of each group vector (sparse) or the matrix shape (low-rank).
  std::size_t group_dim(FeatureMode mode, std::size_t channels) const;
  Features feature_layout(FeatureMode mode, Dims input) const;
  void validate(FeatureMode mode, Dims input) const;

  Features analyze(FeatureMode mode, const Image& x) const;
  Features analyze(FeatureMode mode, Dims input, std::span<const double> x) const;
  // G^T applied to features, overwriting `out`.
  void synthesize(FeatureMode mode, const Features& z, Dims input, std::span<double> out) const;
  // Gradient of <G_F u, c> with respect to the coefficients F, accumulated
  // into `grad` (same layout as coeffs()).
  void accumulate_coeff_grad(FeatureMode mode, Dims input, std::span<const double> u,
                             const Features& c, double scale, std::span<double> grad) const;

  // Largest eigenvalue of the filter Gram matrix, i.e. ||G_i||_2^2 for one
  // group (identical for every valid position).
  double group_norm_sq(FeatureMode mode) const;

  // Built-in banks.
  static FilterBank dct(std::size_t c_in, std::size_t size, bool per_channel);
  // Gaussian taps with each (filter, channel) slice shifted to zero mean and
  // each filter scaled to unit Frobenius norm.
  static FilterBank zero_mean_random(std::size_t filters, std::size_t c_in, std::size_t size,
                                     std::uint64_t seed);
  static FilterBank gradient(std::size_t c_in);
  static FilterBank identity(std::size_t c_in);
  static FilterBank random(std::size_t filters, std::size_t c_in, std::size_t size,
                           std::uint64_t seed, double scale);

 private:
  std::size_t filters_ = 0, c_in_ = 0, kh_ = 0, kw_ = 0;
  Vec coeffs_;
};

// "LIRLSFB1" container: u32 filters, c_in, k_h, k_w then little-endian f64.
void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path);
FilterBank load_filter_bank(const std::filesystem::path& path);
void write_filter_bank(const FilterBank& bank, std::ostream& out);
FilterBank read_filter_bank(std::istream& in);

// G as a LinearOperator from the image to the feature planes.
class AnalysisOperator final : public LinearOperator {
 public:
  AnalysisOperator(std::shared_ptr<const FilterBank> bank, FeatureMode mode, Dims input);
  Dims input_dims() const override { return input_; }
  Dims output_dims() const override;
  std::string name() const override { return "analysis"; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> out) const override;
  void do_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  std::shared_ptr<const FilterBank> bank_;
  FeatureMode mode_;
  Dims input_;
};

// max over trials of |<Ax,u> - <x,A^T u>| / (||Ax|| ||u||), seeded Gaussian x, u.
double adjoint_check(const LinearOperator& op, std::size_t trials, std::uint64_t seed);

// ||A||_2 by power iteration on A^T A.
double spectral_norm(const LinearOperator& op, std::size_t iterations, std::uint64_t seed,
                     double tolerance = 1e-12);

}  // namespace lirls
