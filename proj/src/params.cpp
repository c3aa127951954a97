#include "ibiumad/params.hpp"

#include <cmath>

namespace ibiumad {

void ParamSet::add(std::string name, Tensor t, bool trainable) {
  t.set_requires_grad(trainable);
  items_.push_back({std::move(name), std::move(t), trainable});
}

void ParamSet::append(const ParamSet& other) {
  items_.insert(items_.end(), other.items_.begin(), other.items_.end());
}

std::vector<Tensor> ParamSet::trainable() const {
  std::vector<Tensor> out;
  for (const auto& p : items_)
    if (p.trainable) out.push_back(p.tensor);
  return out;
}

const NamedParam* ParamSet::find(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

void ParamSet::zero_grad() const {
  for (const auto& p : items_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

Tensor conv_weight(Rng& rng, std::size_t cout, std::size_t cin_per_group, std::size_t k) {
  const double fan_in = static_cast<double>(cin_per_group * k * k);
  return Tensor::randn({cout, cin_per_group, k, k}, rng, std::sqrt(2.0 / fan_in));
}

Tensor dense_weight(Rng& rng, std::size_t in, std::size_t out) {
  return Tensor::randn({in, out}, rng, std::sqrt(2.0 / static_cast<double>(in + out)));
}

}  // namespace ibiumad
