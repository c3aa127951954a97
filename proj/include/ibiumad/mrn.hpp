#pragma once

#include <array>
#include <span>
#include <string>

#include "ibiumad/mfen.hpp"
#include "ibiumad/params.hpp"

namespace ibiumad {

struct ReconstructionOutput {
  Tensor rec2;  // matches pyramid level 2
  Tensor rec4;  // matches pyramid level 4
  std::array<Tensor, 4> stages;
};

/// Four-stage decoder restoring jittered features to clean ones.
///
///   stage 1 @ level 4: conv(F4 ⊕ X1)
///   stage 2 @ level 4: conv(s1 ⊕ X2)                 -> rec4
///   stage 3 @ level 3: conv(up2(s2) ⊕ F3 ⊕ up2(X3))
///   stage 4 @ level 2: conv(up2(s3) ⊕ F2 ⊕ up4(X4))  -> rec2
///
/// Each conv is 3×3 followed by ReLU. The X^i terms are Mamba block
/// outputs; without a Mamba chain the injections are simply absent.
class ReconstructionNet {
 public:
  ReconstructionNet() = default;
  ReconstructionNet(Rng& rng, const ChannelWidths& widths, std::size_t injection_channels, std::string name);

  ReconstructionOutput reconstruct(const FeaturePyramid& abnormal, std::span<const Tensor> mamba_feats) const;

  void collect(ParamSet& out) const;
  std::size_t injection_channels() const { return injection_channels_; }

  std::array<Tensor, 4> weights;
  std::array<Tensor, 4> biases;

 private:
  ChannelWidths widths_{};
  std::size_t injection_channels_ = 0;
  std::string name_;
};

/// Mean over scales {2,4} of per-element MSE against the clean pyramid.
/// With `both_scales` false only scale 4 is used.
Tensor reconstruction_loss(const ReconstructionOutput& rec, const FeaturePyramid& clean, bool both_scales = true);

}  // namespace ibiumad
