#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "lirls/error.hpp"
#include "lirls/operators.hpp"

namespace lirls {

namespace {
constexpr char kBankMagic[8] = {'L', 'I', 'R', 'L', 'S', 'F', 'B', '1'};
}

FilterBank::FilterBank(std::size_t filters, std::size_t c_in, std::size_t kh, std::size_t kw,
                       Vec coeffs)
    : filters_(filters), c_in_(c_in), kh_(kh), kw_(kw), coeffs_(std::move(coeffs)) {
  require(filters > 0 && c_in > 0 && kh > 0 && kw > 0, ErrorCode::kDimension,
          "filter bank: all dimensions must be positive");
  require(coeffs_.size() == filters * c_in * kh * kw, ErrorCode::kDimension,
          "filter bank: coefficient count mismatch");
  for (double v : coeffs_)
    require(std::isfinite(v), ErrorCode::kDomain, "filter bank: non-finite coefficient");
}

std::size_t FilterBank::group_dim(FeatureMode mode, std::size_t channels) const {
  return mode == FeatureMode::kSparse ? filters_ : channels * filters_;
}

void FilterBank::validate(FeatureMode mode, Dims input) const {
  if (mode == FeatureMode::kSparse)
    require(c_in_ == input.channels, ErrorCode::kDimension,
            "filter bank: sparse mode needs c_in == image channels (" + std::to_string(c_in_) +
                " vs " + std::to_string(input.channels) + ")");
  else
    require(c_in_ == 1, ErrorCode::kDimension, "filter bank: low-rank mode needs c_in == 1");
  require(input.height >= kh_ && input.width >= kw_, ErrorCode::kDimension,
          "filter bank: image " + to_string(input) + " smaller than filter support");
}

Features FilterBank::feature_layout(FeatureMode mode, Dims input) const {
  validate(mode, input);
  Features z;
  z.planes = group_dim(mode, input.channels);
  z.height = input.height - kh_ + 1;
  z.width = input.width - kw_ + 1;
  z.data.assign(z.planes * z.positions(), 0.0);
  return z;
}

Features FilterBank::analyze(FeatureMode mode, const Image& x) const {
  return analyze(mode, x.dims(), x.span());
}

Features FilterBank::analyze(FeatureMode mode, Dims input, std::span<const double> x) const {
  require(x.size() == input.size(), ErrorCode::kDimension, "analyze: data/dims mismatch");
  Features z = feature_layout(mode, input);
  const std::size_t W = input.width, oh = z.height, ow = z.width, P = z.positions();
  auto correlate = [&](std::size_t f, std::size_t fc, std::size_t xc, double* dst) {
    const double* src = x.data() + xc * input.plane();
    for (std::size_t a = 0; a < kh_; ++a)
      for (std::size_t b = 0; b < kw_; ++b) {
        const double k = at(f, fc, a, b);
        if (k == 0.0) continue;
        for (std::size_t i = 0; i < oh; ++i) {
          const double* s = src + (i + a) * W + b;
          double* d = dst + i * ow;
          for (std::size_t j = 0; j < ow; ++j) d[j] += k * s[j];
        }
      }
  };
  if (mode == FeatureMode::kSparse) {
    for (std::size_t f = 0; f < filters_; ++f)
      for (std::size_t c = 0; c < c_in_; ++c) correlate(f, c, c, z.data.data() + f * P);
  } else {
    for (std::size_t ch = 0; ch < input.channels; ++ch)
      for (std::size_t f = 0; f < filters_; ++f)
        correlate(f, 0, ch, z.data.data() + (ch * filters_ + f) * P);
  }
  return z;
}

void FilterBank::synthesize(FeatureMode mode, const Features& z, Dims input,
                            std::span<double> out) const {
  validate(mode, input);
  require(out.size() == input.size(), ErrorCode::kDimension, "synthesize: output size mismatch");
  require(z.planes == group_dim(mode, input.channels) && z.height == input.height - kh_ + 1 &&
              z.width == input.width - kw_ + 1,
          ErrorCode::kDimension, "synthesize: feature layout mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t W = input.width, oh = z.height, ow = z.width, P = z.positions();
  auto scatter = [&](std::size_t f, std::size_t fc, std::size_t xc, const double* src) {
    double* dst = out.data() + xc * input.plane();
    for (std::size_t a = 0; a < kh_; ++a)
      for (std::size_t b = 0; b < kw_; ++b) {
        const double k = at(f, fc, a, b);
        if (k == 0.0) continue;
        for (std::size_t i = 0; i < oh; ++i) {
          const double* s = src + i * ow;
          double* d = dst + (i + a) * W + b;
          for (std::size_t j = 0; j < ow; ++j) d[j] += k * s[j];
        }
      }
  };
  if (mode == FeatureMode::kSparse) {
    for (std::size_t f = 0; f < filters_; ++f)
      for (std::size_t c = 0; c < c_in_; ++c) scatter(f, c, c, z.data.data() + f * P);
  } else {
    for (std::size_t ch = 0; ch < input.channels; ++ch)
      for (std::size_t f = 0; f < filters_; ++f)
        scatter(f, 0, ch, z.data.data() + (ch * filters_ + f) * P);
  }
}

void FilterBank::accumulate_coeff_grad(FeatureMode mode, Dims input, std::span<const double> u,
                                       const Features& c, double scale,
                                       std::span<double> grad) const {
  validate(mode, input);
  require(u.size() == input.size() && grad.size() == coeffs_.size(), ErrorCode::kDimension,
          "coeff grad: size mismatch");
  const std::size_t W = input.width, oh = c.height, ow = c.width, P = c.positions();
  auto corr = [&](std::size_t f, std::size_t fc, std::size_t xc, const double* cz) {
    const double* src = u.data() + xc * input.plane();
    for (std::size_t a = 0; a < kh_; ++a)
      for (std::size_t b = 0; b < kw_; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < oh; ++i) {
          const double* us = src + (i + a) * W + b;
          const double* cs = cz + i * ow;
          for (std::size_t j = 0; j < ow; ++j) s += cs[j] * us[j];
        }
        grad[((f * c_in_ + fc) * kh_ + a) * kw_ + b] += scale * s;
      }
  };
  if (mode == FeatureMode::kSparse) {
    for (std::size_t f = 0; f < filters_; ++f)
      for (std::size_t ch = 0; ch < c_in_; ++ch) corr(f, ch, ch, c.data.data() + f * P);
  } else {
    for (std::size_t ch = 0; ch < input.channels; ++ch)
      for (std::size_t f = 0; f < filters_; ++f)
        corr(f, 0, ch, c.data.data() + (ch * filters_ + f) * P);
  }
}

double FilterBank::group_norm_sq(FeatureMode) const {
  // Both modes reduce to the Gram matrix of the flattened filters: the
  // low-rank lift is I_c (x) Gram, which has the same spectrum.
  const std::size_t n = c_in_ * kh_ * kw_;
  Eigen::MatrixXd gram(filters_, filters_);
  for (std::size_t f = 0; f < filters_; ++f)
    for (std::size_t g = 0; g <= f; ++g) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += coeffs_[f * n + t] * coeffs_[g * n + t];
      gram(f, g) = gram(g, f) = s;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

FilterBank FilterBank::dct(std::size_t c_in, std::size_t size, bool per_channel) {
  require(size >= 2, ErrorCode::kDomain, "dct bank: size must be >= 2");
  const double pi = std::acos(-1.0);
  auto basis = [&](std::size_t u, std::size_t t) {
    const double a = u == 0 ? std::sqrt(1.0 / size) : std::sqrt(2.0 / size);
    return a * std::cos(pi * (2.0 * t + 1.0) * u / (2.0 * size));
  };
  const std::size_t atoms = size * size - 1;
  const std::size_t taps = size * size;
  const std::size_t filters = per_channel ? atoms * c_in : atoms;
  Vec coeffs(filters * c_in * taps, 0.0);
  std::size_t f = 0;
  for (std::size_t c = 0; c < (per_channel ? c_in : 1); ++c)
    for (std::size_t u = 0; u < size; ++u)
      for (std::size_t v = 0; v < size; ++v) {
        if (u == 0 && v == 0) continue;
        for (std::size_t ch = 0; ch < c_in; ++ch) {
          if (per_channel && ch != c) continue;
          const double gain = per_channel ? 1.0 : 1.0 / std::sqrt(static_cast<double>(c_in));
          for (std::size_t a = 0; a < size; ++a)
            for (std::size_t b = 0; b < size; ++b)
              coeffs[((f * c_in + ch) * size + a) * size + b] = gain * basis(u, a) * basis(v, b);
        }
        ++f;
      }
  return FilterBank(filters, c_in, size, size, std::move(coeffs));
}

FilterBank FilterBank::gradient(std::size_t c_in) {
  const std::size_t filters = 2 * c_in;
  Vec coeffs(filters * c_in * 4, 0.0);
  for (std::size_t c = 0; c < c_in; ++c) {
    double* h = coeffs.data() + ((2 * c) * c_in + c) * 4;
    double* v = coeffs.data() + ((2 * c + 1) * c_in + c) * 4;
    h[0] = -1.0;
    h[1] = 1.0;
    v[0] = -1.0;
    v[2] = 1.0;
  }
  return FilterBank(filters, c_in, 2, 2, std::move(coeffs));
}

FilterBank FilterBank::identity(std::size_t c_in) {
  Vec coeffs(c_in * c_in, 0.0);
  for (std::size_t c = 0; c < c_in; ++c) coeffs[c * c_in + c] = 1.0;
  return FilterBank(c_in, c_in, 1, 1, std::move(coeffs));
}

FilterBank FilterBank::random(std::size_t filters, std::size_t c_in, std::size_t size,
                              std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Vec coeffs(filters * c_in * size * size);
  for (auto& v : coeffs) v = normal(rng);
  return FilterBank(filters, c_in, size, size, std::move(coeffs));
}

FilterBank FilterBank::zero_mean_random(std::size_t filters, std::size_t c_in, std::size_t size,
                                        std::uint64_t seed) {
  require(filters >= 1 && c_in >= 1 && size >= 2, ErrorCode::kDomain,
          "zero_mean_random: need filters, channels >= 1 and size >= 2");
  FilterBank bank = random(filters, c_in, size, seed, 1.0);
  Vec& c = bank.coeffs_;
  const std::size_t taps = size * size;
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t ch = 0; ch < c_in; ++ch) {
      double* s = c.data() + (f * c_in + ch) * taps;
      double mean = 0.0;
      for (std::size_t t = 0; t < taps; ++t) mean += s[t];
      mean /= static_cast<double>(taps);
      for (std::size_t t = 0; t < taps; ++t) s[t] -= mean;
    }
    double* s = c.data() + f * c_in * taps;
    double n = 0.0;
    for (std::size_t t = 0; t < c_in * taps; ++t) n += s[t] * s[t];
    n = std::sqrt(n);
    for (std::size_t t = 0; t < c_in * taps; ++t) s[t] /= n;
  }
  return bank;
}

void write_filter_bank(const FilterBank& bank, std::ostream& out) {
  out.write(kBankMagic, sizeof kBankMagic);
  auto put_u32 = [&](std::size_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                          static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(bank.filters());
  put_u32(bank.c_in());
  put_u32(bank.kh());
  put_u32(bank.kw());
  for (double v : bank.coeffs()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

FilterBank read_filter_bank(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  require(in.gcount() == 8 && std::memcmp(magic, kBankMagic, 8) == 0, ErrorCode::kFormat,
          "not a LIRLSFB1 filter bank");
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.gcount() == 4, ErrorCode::kFormat, "truncated filter bank header");
    return static_cast<std::size_t>(b[0] | (b[1] << 8) | (b[2] << 16) |
                                    (static_cast<std::uint32_t>(b[3]) << 24));
  };
  const std::size_t f = get_u32(), c = get_u32(), kh = get_u32(), kw = get_u32();
  require(f > 0 && c > 0 && kh > 0 && kw > 0 && f * c * kh * kw < (1u << 26), ErrorCode::kFormat,
          "corrupt filter bank header");
  Vec coeffs(f * c * kh * kw);
  for (auto& v : coeffs) {
    std::uint64_t bits;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    require(in.gcount() == sizeof bits, ErrorCode::kFormat, "truncated filter bank data");
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    std::memcpy(&v, &bits, sizeof v);
  }
  return FilterBank(f, c, kh, kw, std::move(coeffs));
}

void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  write_filter_bank(bank, out);
}

FilterBank load_filter_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return read_filter_bank(in);
}

AnalysisOperator::AnalysisOperator(std::shared_ptr<const FilterBank> bank, FeatureMode mode,
                                   Dims input)
    : bank_(std::move(bank)), mode_(mode), input_(input) {
  bank_->validate(mode_, input_);
}

Dims AnalysisOperator::output_dims() const {
  return {bank_->group_dim(mode_, input_.channels), input_.height - bank_->kh() + 1,
          input_.width - bank_->kw() + 1};
}

void AnalysisOperator::do_apply(std::span<const double> x, std::span<double> out) const {
  const Features z = bank_->analyze(mode_, input_, x);
  std::copy(z.data.begin(), z.data.end(), out.begin());
}

void AnalysisOperator::do_adjoint(std::span<const double> u, std::span<double> out) const {
  const Dims od = output_dims();
  Features z{od.channels, od.height, od.width, Vec(u.begin(), u.end())};
  bank_->synthesize(mode_, z, input_, out);
}

}  // namespace lirls
