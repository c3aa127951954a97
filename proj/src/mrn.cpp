#include "ibiumad/mrn.hpp"

namespace ibiumad {

ReconstructionNet::ReconstructionNet(Rng& rng, const ChannelWidths& widths, std::size_t injection_channels,
                                     std::string name)
    : widths_(widths), injection_channels_(injection_channels), name_(std::move(name)) {
  const std::size_t c2 = widths[1], c3 = widths[2], c4 = widths[3], cx = injection_channels;
  const std::array<std::size_t, 4> cin = {c4 + cx, c4 + cx, c4 + c3 + cx, c3 + c2 + cx};
  const std::array<std::size_t, 4> cout = {c4, c4, c3, c2};
  for (std::size_t i = 0; i < 4; ++i) {
    weights[i] = conv_weight(rng, cout[i], cin[i], 3);
    biases[i] = Tensor::zeros({cout[i]});
  }
}

ReconstructionOutput ReconstructionNet::reconstruct(const FeaturePyramid& abnormal,
                                                    std::span<const Tensor> mamba_feats) const {
  const bool inject = injection_channels_ > 0;
  if (inject && mamba_feats.size() != 4)
    throw DimensionError(name_ + ": expected 4 Mamba injections, got " + std::to_string(mamba_feats.size()));
  if (!inject && !mamba_feats.empty())
    throw DimensionError(name_ + ": built without injections but received some");
  const Tensor& f4 = abnormal.level(4);
  for (int l = 2; l <= 4; ++l)
    if (abnormal.level(l).dim(0) != widths_[l - 1])
      throw DimensionError(name_ + ": pyramid level " + std::to_string(l) + " has " +
                           std::to_string(abnormal.level(l).dim(0)) + " channels");
  if (inject)
    for (const Tensor& x : mamba_feats)
      if (x.dim(0) != injection_channels_ || x.dim(1) != f4.dim(1) || x.dim(2) != f4.dim(2))
        throw DimensionError(name_ + ": injection shape " + shape_str(x.shape()) + " incompatible with level 4 " +
                             shape_str(f4.shape()));

  auto with_injection = [&](std::vector<Tensor> parts, std::size_t i, std::size_t factor) {
    if (inject) parts.push_back(upsample_nearest(mamba_feats[i], factor));
    return parts.size() == 1 ? parts[0] : concat(parts, 0);
  };
  auto stage = [&](std::size_t i, const Tensor& in) { return relu(conv2d(in, weights[i], biases[i])); };

  ReconstructionOutput out;
  out.stages[0] = stage(0, with_injection({f4}, 0, 1));
  out.stages[1] = stage(1, with_injection({out.stages[0]}, 1, 1));
  out.stages[2] = stage(2, with_injection({upsample_nearest(out.stages[1], 2), abnormal.level(3)}, 2, 2));
  out.stages[3] = stage(3, with_injection({upsample_nearest(out.stages[2], 2), abnormal.level(2)}, 3, 4));
  out.rec4 = out.stages[1];
  out.rec2 = out.stages[3];
  return out;
}

void ReconstructionNet::collect(ParamSet& out) const {
  for (std::size_t i = 0; i < 4; ++i) {
    out.add(name_ + ".stage" + std::to_string(i + 1) + ".weight", weights[i]);
    out.add(name_ + ".stage" + std::to_string(i + 1) + ".bias", biases[i]);
  }
}

Tensor reconstruction_loss(const ReconstructionOutput& rec, const FeaturePyramid& clean, bool both_scales) {
  const Tensor& c4 = clean.level(4);
  Tensor l4 = mse(rec.rec4, c4, static_cast<double>(c4.numel()));
  if (!both_scales) return l4;
  const Tensor& c2 = clean.level(2);
  Tensor l2 = mse(rec.rec2, c2, static_cast<double>(c2.numel()));
  return scale(add(l2, l4), 0.5);
}

}  // namespace ibiumad
