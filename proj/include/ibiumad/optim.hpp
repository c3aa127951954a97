#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "ibiumad/tensor.hpp"

namespace ibiumad {

/// SGD with classical momentum: v = mu·v + g; p -= lr·v.
class Sgd {
 public:
  explicit Sgd(double lr = 1e-3, double momentum = 0.9) : lr_(lr), momentum_(momentum) {}

  void step(const std::vector<Tensor>& params);
  void reset() { velocity_.clear(); }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  std::unordered_map<std::uint64_t, std::vector<double>> velocity_;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`
/// (no-op when max_norm <= 0). Returns the norm before clipping.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

/// Single plain update p -= lr·g on raw buffers.
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

}  // namespace ibiumad
