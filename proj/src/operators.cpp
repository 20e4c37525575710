#include "lirls/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "lirls/error.hpp"

namespace lirls {

Vec LinearOperator::apply(std::span<const double> x) const {
  Vec out(output_dims().size());
  apply(x, out);
  return out;
}

Vec LinearOperator::adjoint(std::span<const double> u) const {
  Vec out(input_dims().size());
  adjoint(u, out);
  return out;
}

void LinearOperator::apply(std::span<const double> x, std::span<double> out) const {
  require(x.size() == input_dims().size() && out.size() == output_dims().size(),
          ErrorCode::kDimension,
          name() + ".apply: expected input " + to_string(input_dims()) + " (" +
              std::to_string(input_dims().size()) + " values), got " + std::to_string(x.size()));
  do_apply(x, out);
}

void LinearOperator::adjoint(std::span<const double> u, std::span<double> out) const {
  require(u.size() == output_dims().size() && out.size() == input_dims().size(),
          ErrorCode::kDimension,
          name() + ".adjoint: expected input " + to_string(output_dims()) + " (" +
              std::to_string(output_dims().size()) + " values), got " + std::to_string(u.size()));
  do_adjoint(u, out);
}

double Kernel::sum() const {
  double s = 0.0;
  for (double v : taps) s += v;
  return s;
}

Kernel delta_kernel() { return Kernel{1, 1, {1.0}}; }

Kernel load_kernel(const std::filesystem::path& path) {
  if (path.extension() == ".pfm") {
    const Image img = load_pfm(path);
    require(img.channels() == 1, ErrorCode::kFormat, "kernel PFM must be single-channel");
    return Kernel{img.height(), img.width(), img.data()};
  }
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open kernel " + path.string());
  Kernel k;
  std::string line;
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream row(line);
    std::size_t count = 0;
    std::string tok;
    while (row >> tok) {
      try {
        k.taps.push_back(std::stod(tok));
      } catch (const std::exception&) {
        fail(ErrorCode::kFormat, "bad kernel entry '" + tok + "' in " + path.string());
      }
      ++count;
    }
    if (count == 0) continue;
    if (k.width == 0) k.width = count;
    require(count == k.width, ErrorCode::kFormat, "ragged kernel rows in " + path.string());
    ++k.height;
  }
  require(k.height > 0, ErrorCode::kFormat, "empty kernel file " + path.string());
  for (double v : k.taps)
    require(std::isfinite(v), ErrorCode::kFormat, "non-finite kernel entry in " + path.string());
  return k;
}

void save_kernel_text(const Kernel& k, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out.precision(17);
  for (std::size_t y = 0; y < k.height; ++y) {
    for (std::size_t x = 0; x < k.width; ++x) out << (x ? " " : "") << k.at(y, x);
    out << "\n";
  }
}

void IdentityOperator::do_apply(std::span<const double> x, std::span<double> out) const {
  std::copy(x.begin(), x.end(), out.begin());
}

void IdentityOperator::do_adjoint(std::span<const double> u, std::span<double> out) const {
  std::copy(u.begin(), u.end(), out.begin());
}

// ---- blur -----------------------------------------------------------------

BlurOperator::BlurOperator(Kernel kernel, Dims input) : kernel_(std::move(kernel)), input_(input) {
  require(kernel_.height > 0 && kernel_.width > 0 &&
              kernel_.taps.size() == kernel_.height * kernel_.width,
          ErrorCode::kDimension, "blur: malformed kernel");
  for (double v : kernel_.taps)
    require(std::isfinite(v), ErrorCode::kDomain, "blur: non-finite kernel tap");
  require(input.height >= kernel_.height && input.width >= kernel_.width, ErrorCode::kDimension,
          "blur: input " + to_string(input) + " smaller than kernel");
  output_ = {input.channels, input.height - kernel_.height + 1, input.width - kernel_.width + 1};
}

Dims BlurOperator::input_for(const Kernel& kernel, Dims observed) {
  return {observed.channels, observed.height + kernel.height - 1,
          observed.width + kernel.width - 1};
}

// y[c][i][j] = sum_ab k[a][b] x[c][i + kh-1-a][j + kw-1-b]
void BlurOperator::do_apply(std::span<const double> x, std::span<double> out) const {
  const std::size_t kh = kernel_.height, kw = kernel_.width;
  const std::size_t W = input_.width, oh = output_.height, ow = output_.width;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < input_.channels; ++c) {
    const double* src = x.data() + c * input_.plane();
    double* dst = out.data() + c * output_.plane();
    for (std::size_t a = 0; a < kh; ++a)
      for (std::size_t b = 0; b < kw; ++b) {
        const double k = kernel_.at(a, b);
        if (k == 0.0) continue;
        const std::size_t dy = kh - 1 - a, dx = kw - 1 - b;
        for (std::size_t i = 0; i < oh; ++i) {
          const double* s = src + (i + dy) * W + dx;
          double* d = dst + i * ow;
          for (std::size_t j = 0; j < ow; ++j) d[j] += k * s[j];
        }
      }
  }
}

void BlurOperator::correlate_back(const Kernel& k, std::span<const double> u,
                                  std::span<double> out) const {
  const std::size_t kh = k.height, kw = k.width;
  const std::size_t W = input_.width, oh = output_.height, ow = output_.width;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < input_.channels; ++c) {
    const double* src = u.data() + c * output_.plane();
    double* dst = out.data() + c * input_.plane();
    for (std::size_t a = 0; a < kh; ++a)
      for (std::size_t b = 0; b < kw; ++b) {
        const double kv = k.at(a, b);
        if (kv == 0.0) continue;
        const std::size_t dy = kh - 1 - a, dx = kw - 1 - b;
        for (std::size_t i = 0; i < oh; ++i) {
          const double* s = src + i * ow;
          double* d = dst + (i + dy) * W + dx;
          for (std::size_t j = 0; j < ow; ++j) d[j] += kv * s[j];
        }
      }
  }
}

void BlurOperator::do_adjoint(std::span<const double> u, std::span<double> out) const {
  correlate_back(kernel_, u, out);
}

namespace {
Kernel transpose(const Kernel& k) {
  Kernel t{k.width, k.height, Vec(k.taps.size())};
  for (std::size_t y = 0; y < k.height; ++y)
    for (std::size_t x = 0; x < k.width; ++x) t.taps[x * k.height + y] = k.at(y, x);
  return t;
}
}  // namespace

MutatedBlurOperator::MutatedBlurOperator(Kernel kernel, Dims input)
    : BlurOperator(std::move(kernel), input), transposed_(transpose(kernel_)) {
  require(kernel_.height == kernel_.width, ErrorCode::kDimension,
          "mutated blur needs a square kernel");
}

void MutatedBlurOperator::do_adjoint(std::span<const double> u, std::span<double> out) const {
  correlate_back(transposed_, u, out);
}

// ---- super-resolution -----------------------------------------------------

SrOperator::SrOperator(Kernel kernel, std::size_t scale, Dims input)
    : blur_(std::move(kernel), input), scale_(scale) {
  require(scale >= 1, ErrorCode::kDomain, "sr: scale must be >= 1");
  const Dims v = blur_.output_dims();
  output_ = {v.channels, v.height / scale, v.width / scale};
  require(output_.height > 0 && output_.width > 0, ErrorCode::kDimension,
          "sr: input too small for scale " + std::to_string(scale));
}

Dims SrOperator::input_for(const Kernel& kernel, std::size_t scale, Dims observed) {
  return {observed.channels, observed.height * scale + kernel.height - 1,
          observed.width * scale + kernel.width - 1};
}

void SrOperator::do_apply(std::span<const double> x, std::span<double> out) const {
  const Dims v = blur_.output_dims();
  Vec blurred(v.size());
  blur_.apply(x, blurred);
  for (std::size_t c = 0; c < v.channels; ++c)
    for (std::size_t i = 0; i < output_.height; ++i)
      for (std::size_t j = 0; j < output_.width; ++j)
        out[(c * output_.height + i) * output_.width + j] =
            blurred[(c * v.height + i * scale_) * v.width + j * scale_];
}

void SrOperator::do_adjoint(std::span<const double> u, std::span<double> out) const {
  const Dims v = blur_.output_dims();
  Vec up(v.size(), 0.0);
  for (std::size_t c = 0; c < v.channels; ++c)
    for (std::size_t i = 0; i < output_.height; ++i)
      for (std::size_t j = 0; j < output_.width; ++j)
        up[(c * v.height + i * scale_) * v.width + j * scale_] =
            u[(c * output_.height + i) * output_.width + j];
  blur_.adjoint(up, out);
}

// ---- CFA ------------------------------------------------------------------

CfaOperator::CfaOperator(const std::string& pattern, std::size_t height, std::size_t width)
    : pattern_(pattern), height_(height), width_(width) {
  require(pattern.size() == 4, ErrorCode::kDomain, "cfa: pattern must have 4 letters");
  std::size_t seen[3] = {0, 0, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(pattern[i])));
    if (ch == 'R') layout_[i] = 0;
    else if (ch == 'G') layout_[i] = 1;
    else if (ch == 'B') layout_[i] = 2;
    else fail(ErrorCode::kDomain, "cfa: bad pattern letter in " + pattern);
    ++seen[layout_[i]];
  }
  require(seen[0] == 1 && seen[1] == 2 && seen[2] == 1, ErrorCode::kDomain,
          "cfa: pattern must be a Bayer layout (one R, two G, one B): " + pattern);
  require(height > 0 && width > 0, ErrorCode::kDimension, "cfa: empty image");
}

void CfaOperator::do_apply(std::span<const double> x, std::span<double> out) const {
  const std::size_t n = height_ * width_;
  for (std::size_t y = 0; y < height_; ++y)
    for (std::size_t xx = 0; xx < width_; ++xx)
      out[y * width_ + xx] = x[channel_at(y, xx) * n + y * width_ + xx];
}

void CfaOperator::do_adjoint(std::span<const double> u, std::span<double> out) const {
  const std::size_t n = height_ * width_;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t y = 0; y < height_; ++y)
    for (std::size_t xx = 0; xx < width_; ++xx)
      out[channel_at(y, xx) * n + y * width_ + xx] = u[y * width_ + xx];
}

// ---- composition ----------------------------------------------------------

ComposedOperator::ComposedOperator(OperatorPtr outer, OperatorPtr inner)
    : outer_(std::move(outer)), inner_(std::move(inner)) {
  require(outer_->input_dims().size() == inner_->output_dims().size(), ErrorCode::kDimension,
          "compose: " + to_string(inner_->output_dims()) + " does not feed " +
              to_string(outer_->input_dims()));
}

void ComposedOperator::do_apply(std::span<const double> x, std::span<double> out) const {
  Vec mid(inner_->output_dims().size());
  inner_->apply(x, mid);
  outer_->apply(mid, out);
}

void ComposedOperator::do_adjoint(std::span<const double> u, std::span<double> out) const {
  Vec mid(outer_->input_dims().size());
  outer_->adjoint(u, mid);
  inner_->adjoint(mid, out);
}

// ---- diagnostics ----------------------------------------------------------

double adjoint_check(const LinearOperator& op, std::size_t trials, std::uint64_t seed) {
  require(trials >= 1, ErrorCode::kDomain, "adjoint_check: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec x(op.input_dims().size()), u(op.output_dims().size());
  Vec ax(u.size()), atu(x.size());
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& v : x) v = normal(rng);
    for (auto& v : u) v = normal(rng);
    op.apply(x, ax);
    op.adjoint(u, atu);
    const double lhs = dot(ax, u), rhs = dot(x, atu);
    const double scale = norm2(ax) * norm2(u);
    const double defect = scale > 0.0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
    worst = std::max(worst, defect);
  }
  return worst;
}

double spectral_norm(const LinearOperator& op, std::size_t iterations, std::uint64_t seed,
                     double tolerance) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec v(op.input_dims().size());
  for (auto& e : v) e = normal(rng);
  double nv = norm2(v);
  for (auto& e : v) e /= nv;
  Vec av(op.output_dims().size()), w(v.size());
  double lambda = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    op.apply(v, av);
    op.adjoint(av, w);
    const double next = dot(v, w);
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / nw;
    const bool done = it > 0 && std::abs(next - lambda) <= tolerance * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace lirls
