#pragma once

#include <cstddef>
#include <vector>

#include "ibiumad/tensor.hpp"

namespace ibiumad {

/// Pixel-level anomaly scores for one image plus the image-level score.
struct AnomalyScoreMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> map;  // row-major, nonnegative
  double image_score = 0.0;  // max of the smoothed map
};

/// Per-location squared L2 across channels of (target - reconstruction).
std::vector<double> residual_map(const Tensor& target, const Tensor& reconstruction);

/// Bilinear resize (half-pixel centres, edge clamped).
std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t sh, std::size_t sw, std::size_t dh,
                                    std::size_t dw);

/// Separable Gaussian blur, kernel truncated at 4σ, borders clamped.
std::vector<double> gaussian_blur(const std::vector<double>& src, std::size_t h, std::size_t w, double sigma);

/// residual -> upsample to target size -> Gaussian(σ) -> max.
AnomalyScoreMap anomaly_map(const Tensor& target, const Tensor& reconstruction, std::size_t out_h, std::size_t out_w,
                            double sigma = 4.0);

/// The same upsample, blur and max applied to any h×w grid of cell scores.
AnomalyScoreMap score_map(const std::vector<double>& cells, std::size_t h, std::size_t w, std::size_t out_h,
                          std::size_t out_w, double sigma = 4.0);

}  // namespace ibiumad
