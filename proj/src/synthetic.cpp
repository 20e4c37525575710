#include "lirls/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "lirls/error.hpp"

namespace lirls {

namespace {

void normalise(Kernel& k) {
  double s = 0.0;
  for (double v : k.taps) s += v;
  require(s > 0.0, ErrorCode::kDomain, "kernel has zero mass");
  for (auto& v : k.taps) v /= s;
}

void check_size(std::size_t size) {
  require(size >= 3 && size % 2 == 1, ErrorCode::kDomain,
          "kernel size must be odd and >= 3 (got " + std::to_string(size) + ")");
}

}  // namespace

KernelKind parse_kernel_kind(const std::string& s) {
  if (s == "gaussian") return KernelKind::kGaussian;
  if (s == "motion") return KernelKind::kMotion;
  fail(ErrorCode::kConfig, "unknown kernel kind '" + s + "' (gaussian|motion)");
}

Kernel gaussian_kernel(std::size_t size, double sigma) {
  check_size(size);
  Kernel k{size, size, Vec(size * size, 0.0)};
  const double c = static_cast<double>(size / 2);
  if (sigma <= 0.0) {
    k.taps[(size / 2) * size + size / 2] = 1.0;
    return k;
  }
  for (std::size_t a = 0; a < size; ++a)
    for (std::size_t b = 0; b < size; ++b) {
      const double dy = static_cast<double>(a) - c, dx = static_cast<double>(b) - c;
      k.taps[a * size + b] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  normalise(k);
  return k;
}

Kernel synth_kernel(KernelKind kind, std::size_t size, std::uint64_t seed) {
  check_size(size);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double half = static_cast<double>(size / 2);
  if (kind == KernelKind::kGaussian) return gaussian_kernel(size, (0.15 + 0.2 * uni(rng)) * half + 0.3);

  // Random walk with inertia, kept inside the support.
  Kernel k{size, size, Vec(size * size, 0.0)};
  const std::size_t steps = 4 * size;
  double px = 0.0, py = 0.0;
  double angle = 2.0 * std::acos(-1.0) * uni(rng);
  const double speed = half / static_cast<double>(steps) * 1.6;
  std::normal_distribution<double> turn(0.0, 0.35);
  for (std::size_t s = 0; s < steps; ++s) {
    angle += turn(rng);
    px = std::clamp(px + speed * std::cos(angle), -half + 1.0, half - 1.0);
    py = std::clamp(py + speed * std::sin(angle), -half + 1.0, half - 1.0);
    const double fx = px + half, fy = py + half;
    const auto x0 = static_cast<std::size_t>(std::floor(fx));
    const auto y0 = static_cast<std::size_t>(std::floor(fy));
    const double ax = fx - static_cast<double>(x0), ay = fy - static_cast<double>(y0);
    k.taps[y0 * size + x0] += (1 - ax) * (1 - ay);
    k.taps[y0 * size + x0 + 1] += ax * (1 - ay);
    k.taps[(y0 + 1) * size + x0] += (1 - ax) * ay;
    k.taps[(y0 + 1) * size + x0 + 1] += ax * ay;
  }
  // Separable smoothing with sigma 0.3 (3 taps suffice).
  const double e = std::exp(-1.0 / (2.0 * 0.3 * 0.3));
  const double g[3] = {e / (1 + 2 * e), 1 / (1 + 2 * e), e / (1 + 2 * e)};
  Vec tmp(size * size, 0.0);
  for (std::size_t a = 0; a < size; ++a)
    for (std::size_t b = 0; b < size; ++b)
      for (int d = -1; d <= 1; ++d) {
        const auto bb = static_cast<std::ptrdiff_t>(b) + d;
        if (bb >= 0 && bb < static_cast<std::ptrdiff_t>(size))
          tmp[a * size + b] += g[d + 1] * k.taps[a * size + static_cast<std::size_t>(bb)];
      }
  std::fill(k.taps.begin(), k.taps.end(), 0.0);
  for (std::size_t a = 0; a < size; ++a)
    for (std::size_t b = 0; b < size; ++b)
      for (int d = -1; d <= 1; ++d) {
        const auto aa = static_cast<std::ptrdiff_t>(a) + d;
        if (aa >= 0 && aa < static_cast<std::ptrdiff_t>(size))
          k.taps[a * size + b] += g[d + 1] * tmp[static_cast<std::size_t>(aa) * size + b];
      }
  normalise(k);
  return k;
}

Image synthetic_image(Dims dims, std::uint64_t seed) {
  require(dims.channels >= 1 && dims.height >= 1 && dims.width >= 1, ErrorCode::kDimension,
          "synthetic_image: empty dims");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double H = static_cast<double>(dims.height), W = static_cast<double>(dims.width);
  const std::size_t C = dims.channels;

  auto colour = [&]() {
    Vec c(C);
    for (auto& v : c) v = 0.1 + 0.8 * uni(rng);
    return c;
  };
  const Vec base = colour(), slope = colour();
  const double gdir = 2.0 * std::acos(-1.0) * uni(rng);

  enum Shape { kDisc, kBox, kStripes };
  struct Item {
    Shape shape;
    double cx, cy, r1, r2, angle, freq;
    Vec col;
  };
  const std::size_t count = 4 + static_cast<std::size_t>(uni(rng) * 5.0);
  std::vector<Item> items;
  for (std::size_t i = 0; i < count; ++i) {
    Item it;
    const double u = uni(rng);
    it.shape = u < 0.45 ? kDisc : (u < 0.85 ? kBox : kStripes);
    it.cx = uni(rng) * W;
    it.cy = uni(rng) * H;
    it.r1 = (0.08 + 0.25 * uni(rng)) * std::min(H, W);
    it.r2 = (0.08 + 0.25 * uni(rng)) * std::min(H, W);
    it.angle = std::acos(-1.0) * uni(rng);
    it.freq = 0.15 + 0.25 * uni(rng);
    it.col = colour();
    items.push_back(std::move(it));
  }

  auto inside = [](const Item& it, double x, double y) {
    const double dx = x - it.cx, dy = y - it.cy;
    const double ca = std::cos(it.angle), sa = std::sin(it.angle);
    const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
    switch (it.shape) {
      case kDisc: return (u * u) / (it.r1 * it.r1) + (v * v) / (it.r2 * it.r2) <= 1.0;
      case kBox: return std::abs(u) <= it.r1 && std::abs(v) <= it.r2;
      case kStripes:
        return std::abs(u) <= it.r1 && std::abs(v) <= it.r2 && std::sin(it.freq * u) > 0.0;
    }
    return false;
  };

  Image img(dims);
  constexpr int kSuper = 3;
  for (std::size_t y = 0; y < dims.height; ++y)
    for (std::size_t x = 0; x < dims.width; ++x) {
      Vec acc(C, 0.0);
      for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx) {
          const double fx = static_cast<double>(x) + (sx + 0.5) / kSuper;
          const double fy = static_cast<double>(y) + (sy + 0.5) / kSuper;
          const double t = (std::cos(gdir) * fx / W + std::sin(gdir) * fy / H);
          Vec v(C);
          for (std::size_t c = 0; c < C; ++c) v[c] = base[c] + 0.3 * (slope[c] - 0.5) * t;
          for (const auto& it : items)
            if (inside(it, fx, fy)) v = it.col;
          for (std::size_t c = 0; c < C; ++c) acc[c] += v[c];
        }
      for (std::size_t c = 0; c < C; ++c)
        img.at(c, y, x) = std::clamp(acc[c] / (kSuper * kSuper), 0.0, 1.0);
    }
  return img;
}

void write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count, Dims dims,
                             std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string());
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%03zu.png", i);
    save_png(synthetic_image(dims, seed + 1000003ULL * i), dir / name, 16);
  }
}

}  // namespace lirls
