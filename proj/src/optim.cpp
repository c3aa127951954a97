#include "ibiumad/optim.hpp"

#include <cmath>

namespace ibiumad {

void Sgd::step(const std::vector<Tensor>& params) {
  for (Tensor p : params) {
    if (!p.has_grad()) continue;
    auto& v = velocity_[p.id()];
    if (v.size() != p.numel()) v.assign(p.numel(), 0.0);
    auto data = p.data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = momentum_ * v[i] + grad[i];
      data[i] -= lr_ * v[i];
    }
  }
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params)
    if (p.has_grad())
      for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor p : params)
      if (p.has_grad())
        for (double& g : p.grad_mut()) g *= f;
  }
  return norm;
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw DimensionError("sgd_step: length mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

}  // namespace ibiumad
