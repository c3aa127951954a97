#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ibiumad/params.hpp"
#include "ibiumad/tensor.hpp"

namespace ibiumad {

/// One decoder block over a C×h×w map:
///   skip  = DwConv(X)
///   state = ESSM(LN(X))            ESSM = ES2D scan after a depthwise conv
///   out   = Attention(LN(state)) + skip
/// LN normalises each spatial location over channels; attention is
/// single-head scaled dot-product over the h·w tokens.
class MambaBlock {
 public:
  MambaBlock() = default;
  MambaBlock(Rng& rng, std::size_t channels, std::string name);

  Tensor forward(const Tensor& x) const;
  /// ESSM(LN(X)) alone, exposed for tests.
  Tensor state_path(const Tensor& x) const;
  /// Decay per channel, kMaxDecay·sigmoid(decay_logit); the cap keeps a
  /// saturated sigmoid from reaching 1.
  Tensor decay() const { return scale(sigmoid(decay_logit), kMaxDecay); }
  /// Input gain (1 - decay)·b, so each channel's scan has unit DC gain
  /// whatever its decay (zero-order-hold style discretisation).
  Tensor input_gain() const;

  static constexpr double kMaxDecay = 0.999;

  void collect(ParamSet& out) const;
  std::size_t channels() const { return channels_; }

  Tensor dw_weight, dw_bias;          // residual DwConv
  Tensor ln1_gamma, ln1_beta;
  Tensor essm_dw_weight, essm_dw_bias;
  Tensor decay_logit, ssm_b, ssm_c, ssm_d;
  Tensor ln2_gamma, ln2_beta;
  Tensor wq, wk, wv, wo, bo;

 private:
  std::size_t channels_ = 0;
  std::string name_;
};

/// Four chained blocks plus the object classifier on the last block's output.
class MambaDecoder {
 public:
  static constexpr std::size_t kBlocks = 4;

  MambaDecoder() = default;
  MambaDecoder(Rng& rng, std::size_t channels, std::size_t num_classes, std::string name);

  /// Returns X^1..X^4 for input X^0.
  std::vector<Tensor> forward(const Tensor& x0) const;
  /// Global-average-pool then linear: 1×K logits.
  Tensor classify(const Tensor& x_last) const;

  void collect(ParamSet& out) const;

  std::array<MambaBlock, kBlocks> blocks;
  Tensor cls_weight, cls_bias;

 private:
  std::string name_;
};

struct DisentangleLosses {
  Tensor rgb;
  Tensor depth;
};

/// Cross-entropy of each modality's classifier logits (B×K) against the labels.
DisentangleLosses disentangle_loss(const Tensor& logits_rgb, const Tensor& logits_depth,
                                   std::span<const int> labels);

}  // namespace ibiumad
