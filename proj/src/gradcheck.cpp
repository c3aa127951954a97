#include "ibiumad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ibiumad {

GradCheckResult finite_diff_check(const std::function<Tensor()>& loss, const std::vector<Tensor>& inputs,
                                  double h, std::size_t max_probes) {
  for (Tensor t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : inputs) {
    if (t.has_grad()) analytic.emplace_back(t.grad().begin(), t.grad().end());
    else analytic.emplace_back(t.numel(), 0.0);
  }

  GradCheckResult res;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k];
    auto data = t.data();
    const std::size_t n = data.size();
    const std::size_t stride = (max_probes > 0 && n > max_probes) ? (n + max_probes - 1) / max_probes : 1;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = data[i];
      data[i] = orig + h;
      const double up = loss().item();
      data[i] = orig - h;
      const double down = loss().item();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(analytic[k][i]));
      ++res.probes;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_param = k;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace ibiumad
