#include <cmath>
#include <complex>

#include "fft.hpp"
#include "lirls/error.hpp"
#include "lirls/irls.hpp"

namespace lirls {

namespace {

// |FFT|^2 of a small 2-D stencil zero-padded to the grid.
Vec power_spectrum(const FftPlan2d& fft, const double* taps, std::size_t kh, std::size_t kw) {
  Vec grid(fft.height() * fft.width(), 0.0);
  for (std::size_t a = 0; a < kh; ++a)
    for (std::size_t b = 0; b < kw; ++b) grid[a * fft.width() + b] = taps[a * kw + b];
  std::vector<std::complex<double>> spec(fft.spectrum_size());
  fft.forward(grid, spec);
  Vec out(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) out[i] = std::norm(spec[i]);
  return out;
}

}  // namespace

struct CirculantPreconditioner::Impl {
  Dims dims;
  FftPlan2d fft;
  std::vector<Vec> inverse_symbol;  // per channel, pre-scaled by 1/(H W)

  explicit Impl(Dims d) : dims(d), fft(d.height, d.width) {}
};

CirculantPreconditioner::CirculantPreconditioner(const Problem& problem,
                                                 const IterateWeights& weights)
    : impl_(std::make_unique<Impl>(problem.x_dims())) {
  const Dims d = problem.x_dims();
  const FftPlan2d& fft = impl_->fft;
  const std::size_t ns = fft.spectrum_size();
  std::vector<Vec> symbol(d.channels, Vec(ns, problem.alpha()));

  // Data term A^T A.
  const LinearOperator* a = problem.forward.get();
  if (const auto* sr = dynamic_cast<const SrOperator*>(a)) {
    const Vec k2 = power_spectrum(fft, sr->kernel().taps.data(), sr->kernel().height,
                                  sr->kernel().width);
    const double inv = 1.0 / static_cast<double>(sr->scale() * sr->scale());
    for (auto& s : symbol)
      for (std::size_t i = 0; i < ns; ++i) s[i] += inv * k2[i];
  } else if (const auto* blur = dynamic_cast<const BlurOperator*>(a)) {
    const Vec k2 = power_spectrum(fft, blur->kernel().taps.data(), blur->kernel().height,
                                  blur->kernel().width);
    for (auto& s : symbol)
      for (std::size_t i = 0; i < ns; ++i) s[i] += k2[i];
  } else if (const auto* cfa = dynamic_cast<const CfaOperator*>(a)) {
    double share[3] = {0.0, 0.0, 0.0};
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) share[cfa->channel_at(y, x)] += 0.25;
    for (std::size_t c = 0; c < d.channels; ++c)
      for (auto& v : symbol[c]) v += share[c];
  } else {
    for (auto& s : symbol)
      for (auto& v : s) v += 1.0;
  }

  // Prior term with spatially averaged weights.
  if (weights) {
    const FilterBank& bank = *problem.bank;
    const std::size_t taps = bank.kh() * bank.kw();
    const std::size_t groups = weights->groups();
    const double scale = problem.prior.p * problem.sigma * problem.sigma;
    if (problem.mode() == FeatureMode::kSparse) {
      Vec mean(bank.filters(), 0.0);
      for (std::size_t i = 0; i < groups; ++i) {
        const Vec w = weights->group_weights(i);
        for (std::size_t f = 0; f < w.size(); ++f) mean[f] += w[f];
      }
      for (std::size_t f = 0; f < bank.filters(); ++f) {
        const double wf = scale * mean[f] / static_cast<double>(groups);
        for (std::size_t c = 0; c < d.channels; ++c) {
          const double* stencil = bank.coeffs().data() + (f * bank.c_in() + c) * taps;
          const Vec f2 = power_spectrum(fft, stencil, bank.kh(), bank.kw());
          for (std::size_t i = 0; i < ns; ++i) symbol[c][i] += wf * f2[i];
        }
      }
    } else {
      const std::size_t c = d.channels;
      Vec diag(c, 0.0);
      for (std::size_t i = 0; i < groups; ++i) {
        const Vec w = weights->group_weights(i);
        for (std::size_t ch = 0; ch < c; ++ch) diag[ch] += w[ch * c + ch];
      }
      Vec bank_power(ns, 0.0);
      for (std::size_t f = 0; f < bank.filters(); ++f) {
        const Vec f2 = power_spectrum(fft, bank.coeffs().data() + f * taps, bank.kh(), bank.kw());
        for (std::size_t i = 0; i < ns; ++i) bank_power[i] += f2[i];
      }
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double wc = scale * diag[ch] / static_cast<double>(groups);
        for (std::size_t i = 0; i < ns; ++i) symbol[ch][i] += wc * bank_power[i];
      }
    }
  }

  const double norm = 1.0 / static_cast<double>(d.plane());
  for (auto& s : symbol)
    for (auto& v : s) v = norm / v;
  impl_->inverse_symbol = std::move(symbol);
}

CirculantPreconditioner::~CirculantPreconditioner() = default;

void CirculantPreconditioner::apply(std::span<const double> r, std::span<double> z) const {
  const Dims d = impl_->dims;
  require(r.size() == d.size() && z.size() == d.size(), ErrorCode::kDimension,
          "preconditioner: size mismatch");
  std::vector<std::complex<double>> spec(impl_->fft.spectrum_size());
  Vec plane(d.plane());
  for (std::size_t c = 0; c < d.channels; ++c) {
    std::copy_n(r.begin() + static_cast<std::ptrdiff_t>(c * d.plane()), d.plane(), plane.begin());
    impl_->fft.forward(plane, spec);
    const Vec& inv = impl_->inverse_symbol[c];
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= inv[i];
    impl_->fft.inverse(spec, plane);
    std::copy(plane.begin(), plane.end(), z.begin() + static_cast<std::ptrdiff_t>(c * d.plane()));
  }
}

MatVec CirculantPreconditioner::as_matvec() const {
  return [this](std::span<const double> r, std::span<double> z) { apply(r, z); };
}

}  // namespace lirls
