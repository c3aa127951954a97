#pragma once

#include <functional>
#include <vector>

#include "ibiumad/tensor.hpp"

namespace ibiumad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t probes = 0;
};

/// Compares backward() against central differences for every entry of every
/// tensor in `inputs`. Error per coordinate is
/// |analytic - numeric| / max(1, |analytic|).
///
/// `loss` must rebuild the graph from the current values of `inputs` on every
/// call. Inputs sitting at a ReLU kink are not differentiable there; callers
/// choose inputs away from such points.
///
/// `max_probes` > 0 limits the check to an evenly strided subset per tensor.
GradCheckResult finite_diff_check(const std::function<Tensor()>& loss, const std::vector<Tensor>& inputs,
                                  double h = 1e-5, std::size_t max_probes = 0);

}  // namespace ibiumad
