#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ibiumad/mrn.hpp"
#include "ibiumad/params.hpp"

namespace ibiumad {

enum class FusionKind { kAddition, kConcatFc, kLinearGlu, kCrossAttention };

const char* fusion_kind_name(FusionKind k);
/// Accepts addition | concatfc | linearglu | cross_attention; throws ConfigError otherwise.
FusionKind parse_fusion_kind(std::string_view name);

/// Builds the two cascaded inputs from per-modality reconstructions:
/// first = ⊕ rec2 over modalities, second = ⊕ rec4 over modalities.
struct CascadedFeatures {
  Tensor first;
  Tensor second;
};
CascadedFeatures cascade(const std::vector<const ReconstructionOutput*>& recs);

/// Combines the cascaded maps into F_fu on the first map's grid.
///
///   addition        P1(first) + P2(up(second)), P2 without bias
///   concatfc        W[first ⊕ up(second)]
///   linearglu       sigmoid(W1 x) * (W2 x),  x = first ⊕ up(second)
///   cross_attention S(first) + attention with queries from first's tokens and
///                   keys/values from second's; S is a 1×1 projection
class FusionModule {
 public:
  FusionModule() = default;
  FusionModule(Rng& rng, FusionKind kind, std::size_t first_channels, std::size_t second_channels,
               std::size_t out_channels, std::size_t attn_dim = 0);

  Tensor fuse(const CascadedFeatures& in) const;
  Tensor fuse(const std::vector<const ReconstructionOutput*>& recs) const { return fuse(cascade(recs)); }

  FusionKind kind() const { return kind_; }
  std::size_t out_channels() const { return out_channels_; }
  void collect(ParamSet& out) const;

  // Weights used depend on kind; unused ones stay undefined.
  Tensor p1_weight, p1_bias, p2_weight;  // addition (1×1 convs)
  Tensor fc_weight, fc_bias;             // concatfc, and the value path of linearglu
  Tensor gate_weight, gate_bias;         // linearglu
  Tensor wq, wk, wv;                     // cross_attention
  Tensor skip_weight, skip_bias;         // cross_attention query-side path

 private:
  FusionKind kind_ = FusionKind::kCrossAttention;
  std::size_t first_channels_ = 0, second_channels_ = 0, out_channels_ = 0, attn_dim_ = 0;
};

struct ProjectionOutput {
  Tensor z;        // tokens × d_z
  Tensor fused_g;  // same shape as the input map
};

/// Token-wise Linear -> Dropout -> ReLU -> Linear -> Dropout -> ReLU.
class IbProjection {
 public:
  IbProjection() = default;
  /// Throws ConfigError unless 0 < bottleneck < channels.
  IbProjection(Rng& rng, std::size_t channels, std::size_t bottleneck, double dropout);

  ProjectionOutput project(const Tensor& fused, bool train, Rng& rng) const;
  void collect(ParamSet& out) const;
  std::size_t bottleneck() const { return bottleneck_; }

  Tensor w1, b1, w2, b2;

 private:
  std::size_t channels_ = 0, bottleneck_ = 0;
  double dropout_ = 0.0;
};

struct PredictiveDistributions {
  Tensor full;        // P(Y|F_fu), gradient stopped
  Tensor bottleneck;  // P(Y|F_fu^g)
};

/// Pools each map and applies one shared linear head followed by softmax.
class PredictiveHead {
 public:
  PredictiveHead() = default;
  PredictiveHead(Rng& rng, std::size_t channels, std::size_t num_classes);

  PredictiveDistributions predict(const Tensor& fused, const Tensor& fused_g) const;
  void collect(ParamSet& out) const;

  Tensor weight, bias;
};

/// Optional per-pixel anomaly head: a 1×1 conv from the detached residual
/// F_org - F_fu^g to one logit per cell. Off by default; the residual
/// itself is the standard score.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(Rng& rng, std::size_t channels);

  /// 1×H×W logits.
  Tensor logits(const Tensor& target, const Tensor& fused_g) const;
  void collect(ParamSet& out) const;

  Tensor weight, bias;
};

/// Mean per-cell binary cross-entropy of 1×H×W logits against a 0/1 mask
/// (an empty mask counts as all zeros).
Tensor discriminator_loss(const Tensor& logits, std::span<const std::uint8_t> mask);

/// Batch-mean KL[P(Y|F_fu) || P(Y|F_fu^g)].
Tensor ib_loss(const Tensor& y_full, const Tensor& y_bottleneck);

/// ||F_org - F_fu^g||² / (W·H) over a C×H×W grid.
Tensor fusion_loss(const Tensor& target, const Tensor& fused_g);

struct LossWeights {
  double rgb_cls = 1.0;  // λ1
  double depth_cls = 1.0;  // λ2
  double fusion = 1.0;  // λ3
  double ib = 1.0;  // λ4
};

/// Undefined components count as zero.
struct LossBundle {
  Tensor rgb_cls, depth_cls, fusion, ib, reconstruction;
  LossWeights weights;
  Tensor discriminator;  // only with the optional head, unit weight
};

/// λ1·L_R + λ2·L_D + λ3·L_Fusion + λ4·L_IB + L_rec (+ L_disc)
Tensor total_loss(const LossBundle& b);

}  // namespace ibiumad
