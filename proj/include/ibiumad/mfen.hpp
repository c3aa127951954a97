#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ibiumad/params.hpp"
#include "ibiumad/tensor.hpp"

namespace ibiumad {

enum class Modality { kRgb, kDepth };
const char* modality_name(Modality m);

/// Feature maps at 1/2, 1/4, 1/8 and 1/16 of the input resolution.
struct FeaturePyramid {
  std::array<Tensor, 4> levels;

  /// 1-based level index, matching the usual "level i at H/2^i" convention.
  const Tensor& level(int i) const { return levels.at(static_cast<std::size_t>(i - 1)); }
  Tensor& level(int i) { return levels.at(static_cast<std::size_t>(i - 1)); }
};

using ChannelWidths = std::array<std::size_t, 4>;

/// Four-stage CNN backbone: (3×3 conv -> ReLU -> 2× avg-pool) per stage.
class Encoder {
 public:
  Encoder() = default;
  Encoder(Rng& rng, std::size_t in_channels, const ChannelWidths& widths, std::string name);

  /// H and W must be divisible by 16.
  FeaturePyramid encode(const Tensor& x) const;

  void collect(ParamSet& out, bool trainable) const;
  std::size_t in_channels() const { return in_channels_; }
  const ChannelWidths& widths() const { return widths_; }
  const std::string& name() const { return name_; }

  std::array<Tensor, 4> weights;
  std::array<Tensor, 4> biases;

 private:
  std::size_t in_channels_ = 0;
  ChannelWidths widths_{};
  std::string name_;
};

/// Rectangle in relative coordinates [0,1]² (rows y, cols x), half-open.
struct RelativeRect {
  double y0 = 0.0, x0 = 0.0, y1 = 1.0, x1 = 1.0;
};

struct JitterResult {
  FeaturePyramid features;
  /// Per level, H_i×W_i cells; 1 where noise was added.
  std::array<std::vector<std::uint8_t>, 4> mask;
};

/// Adds Gaussian noise with std = alpha·mean(|F_level|) inside `region`
/// (whole map when absent) on every level.
JitterResult feature_jitter(const FeaturePyramid& f, double alpha, const std::optional<RelativeRect>& region,
                            std::uint64_t seed);

/// Random rectangle whose area is a uniform fraction in [area_min, area_max].
RelativeRect random_region(Rng& rng, double area_min, double area_max);

}  // namespace ibiumad
