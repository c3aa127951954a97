#pragma once

#include <optional>
#include <string>

#include "ibiumad/tensor.hpp"

namespace ibiumad {

/// Paired RGB image and depth map of one object instance.
struct MultimodalSample {
  Tensor rgb;    // 3×H×W in [0,1]
  Tensor depth;  // 1×H×W in [0,1]
  int object_id = 0;
  std::optional<Tensor> anomaly_mask;  // 1×H×W in {0,1}
  bool is_anomalous = false;

  std::size_t height() const { return rgb.dim(1); }
  std::size_t width() const { return rgb.dim(2); }
};

/// Throws DimensionError / std::invalid_argument when the sample breaks its
/// invariants (mismatched H×W, values outside [0,1], mask/flag disagreement).
void validate_sample(const MultimodalSample& s);

}  // namespace ibiumad
