#include "ibiumad/sample.hpp"

#include <algorithm>

namespace ibiumad {

void validate_sample(const MultimodalSample& s) {
  if (!s.rgb.defined() || !s.depth.defined()) throw std::invalid_argument("sample missing rgb or depth");
  if (s.rgb.rank() != 3 || s.rgb.dim(0) != 3) throw DimensionError("rgb must be 3×H×W, got " + shape_str(s.rgb.shape()));
  if (s.depth.rank() != 3 || s.depth.dim(0) != 1)
    throw DimensionError("depth must be 1×H×W, got " + shape_str(s.depth.shape()));
  if (s.rgb.dim(1) != s.depth.dim(1) || s.rgb.dim(2) != s.depth.dim(2))
    throw DimensionError("rgb and depth disagree on H×W");
  auto in_unit = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
  };
  if (!in_unit(s.rgb.data()) || !in_unit(s.depth.data()))
    throw std::invalid_argument("sample values outside [0,1]");
  if (s.anomaly_mask) {
    const Tensor& m = *s.anomaly_mask;
    if (m.shape() != s.depth.shape()) throw DimensionError("mask must match depth shape");
    double mx = 0.0;
    for (double v : m.data()) {
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("mask values must be 0 or 1");
      mx = std::max(mx, v);
    }
    if ((mx > 0.0) != s.is_anomalous) throw std::invalid_argument("anomaly flag disagrees with mask");
  }
}

}  // namespace ibiumad
