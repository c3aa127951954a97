#include "ibiumad/injection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "ibiumad/errors.hpp"
#include "ibiumad/rng.hpp"

namespace ibiumad {

namespace {

double fade(double t) { return t * t * (3.0 - 2.0 * t); }

// One octave of lattice noise with `cells` cells across each axis.
void add_octave(std::vector<double>& out, std::size_t h, std::size_t w, int cells, double amp, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(cells) + 1;
  std::vector<std::array<double, 2>> grad(n * n);
  for (auto& g : grad) {
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    g = {std::cos(a), std::sin(a)};
  }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) * cells / static_cast<double>(h);
      const double fx = static_cast<double>(x) * cells / static_cast<double>(w);
      const auto y0 = static_cast<std::size_t>(fy), x0 = static_cast<std::size_t>(fx);
      const double ty = fy - static_cast<double>(y0), tx = fx - static_cast<double>(x0);
      auto dot = [&](std::size_t gy, std::size_t gx, double dy, double dx) {
        const auto& g = grad[gy * n + gx];
        return g[0] * dx + g[1] * dy;
      };
      const double n00 = dot(y0, x0, ty, tx), n01 = dot(y0, x0 + 1, ty, tx - 1.0);
      const double n10 = dot(y0 + 1, x0, ty - 1.0, tx), n11 = dot(y0 + 1, x0 + 1, ty - 1.0, tx - 1.0);
      const double u = fade(tx), v = fade(ty);
      const double top = n00 + u * (n01 - n00), bottom = n10 + u * (n11 - n10);
      out[y * w + x] += amp * (top + v * (bottom - top));
    }
}

Tensor with_data(const Tensor& like, std::vector<double> v) { return Tensor::from(like.shape(), std::move(v)); }

}  // namespace

std::vector<double> perlin_noise(std::size_t h, std::size_t w, int octaves, std::uint64_t seed, int base_cells) {
  if (octaves < 1) throw ParameterError("perlin_noise: octaves must be >= 1");
  if (base_cells < 1) throw ParameterError("perlin_noise: base_cells must be >= 1");
  Rng rng(seed);
  std::vector<double> out(h * w, 0.0);
  double total_amp = 0.0, amp = 1.0;
  for (int o = 0; o < octaves; ++o) {
    add_octave(out, h, w, base_cells << o, amp, rng);
    total_amp += amp;
    amp *= 0.5;
  }
  // A single 2-D octave lies in [-1/sqrt2, 1/sqrt2].
  const double norm = std::numbers::sqrt2 / total_amp;
  for (double& v : out) v = std::clamp(v * norm, -1.0, 1.0);
  return out;
}

double otsu_threshold(std::span<const double> values) {
  if (values.empty()) throw ParameterError("otsu_threshold: no values");
  std::array<double, 256> hist{};
  for (double v : values) hist[static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5)] += 1.0;
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return (best_t + 0.5) / 255.0;
}

std::vector<std::uint8_t> foreground_mask(const Tensor& depth) {
  const double t = otsu_threshold(depth.data());
  std::vector<std::uint8_t> m(depth.numel());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = depth.data()[i] > t ? 1 : 0;
  return m;
}

MultimodalSample inject_spurious(const MultimodalSample& sample, const MultimodalSample& source, double strength,
                                 std::uint64_t seed) {
  if (strength < 0.0 || strength > 1.0) throw ParameterError("inject_spurious: strength must be in [0,1]");
  if (sample.rgb.shape() != source.rgb.shape() || sample.depth.shape() != source.depth.shape())
    throw DimensionError("inject_spurious: sample and source differ in size");
  MultimodalSample out = sample;
  if (strength == 0.0) return out;
  const std::size_t h = sample.height(), w = sample.width(), n = h * w;
  Rng rng(seed);
  const std::size_t sy = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(h) - 1));
  const std::size_t sx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(w) - 1));
  auto shifted = [&](std::size_t i) { return ((i / w + sy) % h) * w + (i % w + sx) % w; };

  const auto fg_sample = foreground_mask(sample.depth);
  const auto fg_source = foreground_mask(source.depth);
  std::vector<double> rgb(sample.rgb.data().begin(), sample.rgb.data().end());
  std::vector<double> depth(sample.depth.data().begin(), sample.depth.data().end());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = shifted(i);
    if (fg_sample[i] || fg_source[j]) continue;
    for (std::size_t c = 0; c < 3; ++c)
      rgb[c * n + i] = (1.0 - strength) * rgb[c * n + i] + strength * source.rgb.data()[c * n + j];
    depth[i] = (1.0 - strength) * depth[i] + strength * source.depth.data()[j];
  }
  out.rgb = with_data(sample.rgb, std::move(rgb));
  out.depth = with_data(sample.depth, std::move(depth));
  return out;
}

MultimodalSample inject_redundant(const MultimodalSample& sample, double intensity, std::uint64_t seed) {
  if (intensity < 0.0) throw ParameterError("inject_redundant: intensity must be >= 0");
  MultimodalSample out = sample;
  if (intensity == 0.0) return out;
  const std::size_t h = sample.height(), w = sample.width(), n = h * w;
  Rng rng(seed);
  auto perturb = [&](const Tensor& t) {
    std::vector<double> v(t.data().begin(), t.data().end());
    for (std::size_t c = 0; c < t.dim(0); ++c) {
      const auto field = perlin_noise(h, w, 4, rng.next());
      for (std::size_t i = 0; i < n; ++i) v[c * n + i] = std::clamp(v[c * n + i] + intensity * field[i], 0.0, 1.0);
    }
    return with_data(t, std::move(v));
  };
  out.rgb = perturb(sample.rgb);
  out.depth = perturb(sample.depth);
  return out;
}

}  // namespace ibiumad
