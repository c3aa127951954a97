#pragma once

#include <string>
#include <vector>

#include "ibiumad/tensor.hpp"

namespace ibiumad {

struct NamedParam {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Flat, ordered list of a model's parameters. Order is construction order,
/// which makes checkpoints and optimizer state deterministic.
class ParamSet {
 public:
  void add(std::string name, Tensor t, bool trainable = true);
  void append(const ParamSet& other);

  const std::vector<NamedParam>& items() const { return items_; }
  std::vector<Tensor> trainable() const;
  const NamedParam* find(const std::string& name) const;
  std::size_t size() const { return items_.size(); }
  std::size_t scalar_count() const;
  void zero_grad() const;

 private:
  std::vector<NamedParam> items_;
};

/// He-normal weight init for a conv [Cout × Cin/g × k × k].
Tensor conv_weight(Rng& rng, std::size_t cout, std::size_t cin_per_group, std::size_t k);
/// Xavier-normal init for a dense [in × out] matrix.
Tensor dense_weight(Rng& rng, std::size_t in, std::size_t out);

}  // namespace ibiumad
