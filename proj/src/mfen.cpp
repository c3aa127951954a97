#include "ibiumad/mfen.hpp"

#include <cmath>

namespace ibiumad {

const char* modality_name(Modality m) { return m == Modality::kRgb ? "rgb" : "depth"; }

Encoder::Encoder(Rng& rng, std::size_t in_channels, const ChannelWidths& widths, std::string name)
    : in_channels_(in_channels), widths_(widths), name_(std::move(name)) {
  std::size_t cin = in_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    weights[i] = conv_weight(rng, widths[i], cin, 3);
    biases[i] = Tensor::zeros({widths[i]});
    cin = widths[i];
  }
}

FeaturePyramid Encoder::encode(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != in_channels_)
    throw DimensionError(name_ + ": expected " + std::to_string(in_channels_) + "×H×W input, got " +
                         shape_str(x.shape()));
  if (x.dim(1) % 16 != 0 || x.dim(2) % 16 != 0)
    throw DimensionError(name_ + ": H and W must be divisible by 16, got " + shape_str(x.shape()));
  FeaturePyramid out;
  Tensor h = x;
  for (std::size_t i = 0; i < 4; ++i) {
    h = avg_pool2(relu(conv2d(h, weights[i], biases[i])));
    out.levels[i] = h;
  }
  return out;
}

void Encoder::collect(ParamSet& out, bool trainable) const {
  for (std::size_t i = 0; i < 4; ++i) {
    out.add(name_ + ".stage" + std::to_string(i + 1) + ".weight", weights[i], trainable);
    out.add(name_ + ".stage" + std::to_string(i + 1) + ".bias", biases[i], trainable);
  }
}

JitterResult feature_jitter(const FeaturePyramid& f, double alpha, const std::optional<RelativeRect>& region,
                            std::uint64_t seed) {
  if (alpha < 0.0) throw ParameterError("feature_jitter: alpha must be >= 0");
  JitterResult res;
  Rng rng(seed);
  for (std::size_t l = 0; l < 4; ++l) {
    const Tensor& lvl = f.levels[l];
    const std::size_t C = lvl.dim(0), H = lvl.dim(1), W = lvl.dim(2);
    auto& mask = res.mask[l];
    mask.assign(H * W, 0);
    if (alpha == 0.0) {
      res.features.levels[l] = lvl;
      continue;
    }
    std::size_t r0 = 0, r1 = H, c0 = 0, c1 = W;
    if (region) {
      r0 = static_cast<std::size_t>(std::floor(region->y0 * H));
      r1 = static_cast<std::size_t>(std::ceil(region->y1 * H));
      c0 = static_cast<std::size_t>(std::floor(region->x0 * W));
      c1 = static_cast<std::size_t>(std::ceil(region->x1 * W));
      r1 = std::min(r1, H);
      c1 = std::min(c1, W);
    }
    double mean_abs = 0.0;
    for (double v : lvl.data()) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(lvl.numel());
    const double stddev = alpha * mean_abs;
    std::vector<double> noise(lvl.numel(), 0.0);
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = c0; c < c1; ++c) mask[r * W + c] = 1;
    for (std::size_t ch = 0; ch < C; ++ch)
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) noise[(ch * H + r) * W + c] = rng.normal(0.0, stddev);
    res.features.levels[l] = add(lvl, Tensor::from(lvl.shape(), std::move(noise)));
  }
  return res;
}

RelativeRect random_region(Rng& rng, double area_min, double area_max) {
  const double area = rng.uniform(area_min, area_max);
  // Aspect ratio in [0.5, 2], clipped so both sides fit in the unit square.
  const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
  double h = std::sqrt(area * aspect), w = std::sqrt(area / aspect);
  if (h > 1.0) { w = area; h = 1.0; }
  if (w > 1.0) { h = area; w = 1.0; }
  const double y0 = rng.uniform(0.0, 1.0 - h), x0 = rng.uniform(0.0, 1.0 - w);
  return {y0, x0, y0 + h, x0 + w};
}

}  // namespace ibiumad
