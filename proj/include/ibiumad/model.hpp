#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ibiumad/ibfm.hpp"
#include "ibiumad/mamba.hpp"
#include "ibiumad/mfen.hpp"
#include "ibiumad/mrn.hpp"
#include "ibiumad/sample.hpp"

namespace ibiumad {

/// Which image streams the model consumes.
enum class InputMode { kRgb, kDepth, kBoth };
const char* input_mode_name(InputMode m);
InputMode parse_input_mode(std::string_view name);

struct JitterConfig {
  double probability = 0.5;
  double alpha_min = 0.5;
  double alpha_max = 2.0;
  double area_min = 0.1;
  double area_max = 0.4;
};

struct ModelConfig {
  ChannelWidths channels{16, 32, 64, 128};
  std::size_t image_size = 64;
  std::size_t num_classes = 10;
  InputMode input_mode = InputMode::kBoth;
  bool use_mamba = true;
  bool use_ibfm = true;
  FusionKind fusion = FusionKind::kCrossAttention;
  /// Bottleneck width as a fraction of the fused channel count.
  double bottleneck_ratio = 0.25;
  double dropout = 0.1;
  bool depth_three_channel = false;
  bool train_encoder = false;
  bool reconstruct_both_scales = true;
  /// Learned per-pixel head scored in place of the raw residual.
  bool discriminator = false;
  LossWeights lambdas{};
  JitterConfig jitter{};
};

/// Clean encoder output for the modalities the model uses.
struct EncodedSample {
  std::optional<FeaturePyramid> rgb;
  std::optional<FeaturePyramid> depth;
};

struct ForwardResult {
  Tensor fused;         // F_fu
  Tensor fused_g;       // F_fu^g (== fused when IBFM is off)
  Tensor z;             // bottleneck tokens (undefined when IBFM is off)
  Tensor target;        // F_org: projected clean feature on the fused grid
  Tensor logits_rgb;    // 1×K, undefined without Mamba/RGB
  Tensor logits_depth;  // 1×K, undefined without Mamba/depth
  Tensor disc_logits;   // 1×H×W, undefined without the discriminator
  PredictiveDistributions predictions;
  LossBundle losses;
  std::array<std::vector<std::uint8_t>, 4> jitter_mask;
};

/// Full network: per-modality encoders, Mamba chains, reconstruction
/// decoders, fusion, IB projection and the shared predictive head.
class IbIumadModel {
 public:
  IbIumadModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamSet parameters() const;

  bool uses(Modality m) const;
  Tensor modality_input(const MultimodalSample& s, Modality m) const;
  EncodedSample encode(const MultimodalSample& s) const;

  /// One sample through the whole network. In training mode features are
  /// jittered (per JitterConfig) and dropout is active.
  ForwardResult forward(const EncodedSample& clean, int label, bool train, Rng& rng) const;

  /// Residual map F_org vs F_fu^g in eval mode; the anomaly-map operand.
  struct EvalFeatures {
    Tensor target;
    Tensor fused_g;
    /// Per-cell anomaly probability when the discriminator is on.
    Tensor disc_prob;
  };
  EvalFeatures evaluate(const MultimodalSample& s) const;
  EvalFeatures evaluate(const EncodedSample& enc) const;

  Encoder encoder_rgb, encoder_depth;
  std::optional<MambaDecoder> mamba_rgb, mamba_depth;
  ReconstructionNet mrn_rgb, mrn_depth;
  FusionModule fusion;
  std::optional<IbProjection> projection;
  PredictiveHead head;
  std::optional<Discriminator> discriminator;
  Tensor target_projection;  // frozen 1×1 conv onto the fused channel count

 private:
  ModelConfig cfg_;
};

void validate_model_config(const ModelConfig& cfg);

}  // namespace ibiumad
