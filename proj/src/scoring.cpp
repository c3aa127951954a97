#include "ibiumad/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "ibiumad/errors.hpp"

namespace ibiumad {

std::vector<double> residual_map(const Tensor& target, const Tensor& reconstruction) {
  if (target.shape() != reconstruction.shape() || target.rank() != 3)
    throw DimensionError("residual_map: shapes " + shape_str(target.shape()) + " vs " +
                         shape_str(reconstruction.shape()));
  const std::size_t C = target.dim(0), HW = target.dim(1) * target.dim(2);
  std::vector<double> out(HW, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < HW; ++p) {
      const double d = target.at(c * HW + p) - reconstruction.at(c * HW + p);
      out[p] += d * d;
    }
  return out;
}

std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t sh, std::size_t sw, std::size_t dh,
                                    std::size_t dw) {
  if (src.size() != sh * sw) throw DimensionError("resize_bilinear: size mismatch");
  std::vector<double> out(dh * dw);
  const double ry = static_cast<double>(sh) / static_cast<double>(dh);
  const double rx = static_cast<double>(sw) / static_cast<double>(dw);
  for (std::size_t y = 0; y < dh; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * ry - 0.5, 0.0, static_cast<double>(sh - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy), y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < dw; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * rx - 0.5, 0.0, static_cast<double>(sw - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx), x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = src[y0 * sw + x0] * (1 - wx) + src[y0 * sw + x1] * wx;
      const double bot = src[y1 * sw + x0] * (1 - wx) + src[y1 * sw + x1] * wx;
      out[y * dw + x] = top * (1 - wy) + bot * wy;
    }
  }
  return out;
}

std::vector<double> gaussian_blur(const std::vector<double>& src, std::size_t h, std::size_t w, double sigma) {
  if (sigma <= 0.0) return src;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) norm += (k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma)));
  for (double& v : k) v /= norm;
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  std::vector<double> tmp(h * w), out(h * w);
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * src[y * W + std::clamp(x + i, 0L, W - 1)];
      tmp[y * W + x] = s;
    }
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp[std::clamp(y + i, 0L, H - 1) * W + x];
      out[y * W + x] = s;
    }
  return out;
}

AnomalyScoreMap anomaly_map(const Tensor& target, const Tensor& reconstruction, std::size_t out_h, std::size_t out_w,
                            double sigma) {
  return score_map(residual_map(target, reconstruction), target.dim(1), target.dim(2), out_h, out_w, sigma);
}

AnomalyScoreMap score_map(const std::vector<double>& cells, std::size_t h, std::size_t w, std::size_t out_h,
                          std::size_t out_w, double sigma) {
  if (cells.size() != h * w) throw DimensionError("score_map: cell count does not match the grid");
  AnomalyScoreMap m;
  m.height = out_h;
  m.width = out_w;
  m.map = gaussian_blur(resize_bilinear(cells, h, w, out_h, out_w), out_h, out_w, sigma);
  for (double& v : m.map) v = std::max(0.0, v);
  m.image_score = *std::max_element(m.map.begin(), m.map.end());
  return m;
}

}  // namespace ibiumad
