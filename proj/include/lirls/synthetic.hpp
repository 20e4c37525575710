#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lirls/image.hpp"
#include "lirls/operators.hpp"

namespace lirls {

enum class KernelKind { kGaussian, kMotion };

KernelKind parse_kernel_kind(const std::string& s);

// Normalised isotropic Gaussian, size x size (size odd). sigma <= 0 gives a
// centred delta.
Kernel gaussian_kernel(std::size_t size, double sigma);

// Seeded blur kernel: Gaussian with a random width, or a random-walk motion
// trajectory splatted bilinearly and smoothed with a sigma 0.3 Gaussian.
// Non-negative, sums to one.
Kernel synth_kernel(KernelKind kind, std::size_t size, std::uint64_t seed);

// Piecewise-smooth colour test image: shaded background, anti-aliased
// discs, boxes and stripes. Values lie in [0, 1].
Image synthetic_image(Dims dims, std::uint64_t seed);

// Writes `count` PNG images named img_000.png... into `dir`.
void write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count, Dims dims,
                             std::uint64_t seed);

}  // namespace lirls
