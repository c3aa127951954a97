#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ibiumad/sample.hpp"

namespace ibiumad {

/// Gradient-lattice noise with smoothstep fades. Octave o has
/// base_cells·2^o lattice cells across the image and amplitude 2^-o; the
/// weighted sum is normalized so the field stays inside [-1, 1].
std::vector<double> perlin_noise(std::size_t h, std::size_t w, int octaves, std::uint64_t seed, int base_cells = 4);

/// Otsu threshold over a 256-bin histogram of values in [0,1].
double otsu_threshold(std::span<const double> values);

/// depth > Otsu threshold, per pixel.
std::vector<std::uint8_t> foreground_mask(const Tensor& depth);

/// Blends `source` into `sample` where both are background (the source is
/// first circularly shifted by a seed-derived offset so repeated draws
/// differ). Foreground pixels, label and mask are untouched.
MultimodalSample inject_spurious(const MultimodalSample& sample, const MultimodalSample& source, double strength,
                                 std::uint64_t seed);

/// Adds intensity × Perlin field to RGB and depth and clamps to [0,1].
MultimodalSample inject_redundant(const MultimodalSample& sample, double intensity, std::uint64_t seed);

}  // namespace ibiumad
