#include "ibiumad/model.hpp"

#include <cmath>

namespace ibiumad {

const char* input_mode_name(InputMode m) {
  switch (m) {
    case InputMode::kRgb: return "rgb";
    case InputMode::kDepth: return "depth";
    case InputMode::kBoth: return "both";
  }
  return "?";
}

InputMode parse_input_mode(std::string_view name) {
  if (name == "rgb") return InputMode::kRgb;
  if (name == "depth") return InputMode::kDepth;
  if (name == "both") return InputMode::kBoth;
  throw ConfigError("unknown input mode '" + std::string(name) + "' (expected rgb|depth|both)");
}

void validate_model_config(const ModelConfig& cfg) {
  if (cfg.image_size == 0 || cfg.image_size % 16 != 0) throw ConfigError("image_size must be a positive multiple of 16");
  if (cfg.use_mamba && cfg.image_size % 32 != 0)
    throw ConfigError("the Mamba scan needs an even level-4 grid: image_size must be a multiple of 32");
  for (std::size_t c : cfg.channels)
    if (c == 0) throw ConfigError("channel widths must be positive");
  if (cfg.num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (cfg.bottleneck_ratio <= 0.0 || cfg.bottleneck_ratio >= 1.0) throw ConfigError("bottleneck_ratio must be in (0,1)");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  const auto& j = cfg.jitter;
  if (j.probability < 0 || j.probability > 1 || j.alpha_min < 0 || j.alpha_max < j.alpha_min || j.area_min <= 0 ||
      j.area_max > 1 || j.area_max < j.area_min)
    throw ConfigError("invalid jitter configuration");
}

IbIumadModel::IbIumadModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate_model_config(cfg);
  Rng rng(seed);
  const auto& ch = cfg.channels;
  const std::size_t inject = cfg.use_mamba ? ch[3] : 0;
  if (uses(Modality::kRgb)) {
    encoder_rgb = Encoder(rng, 3, ch, "mfen.rgb");
    if (cfg.use_mamba) mamba_rgb.emplace(rng, ch[3], cfg.num_classes, "mamba.rgb");
    mrn_rgb = ReconstructionNet(rng, ch, inject, "mrn.rgb");
  }
  if (uses(Modality::kDepth)) {
    encoder_depth = Encoder(rng, cfg.depth_three_channel ? 3 : 1, ch, "mfen.depth");
    if (cfg.use_mamba) mamba_depth.emplace(rng, ch[3], cfg.num_classes, "mamba.depth");
    mrn_depth = ReconstructionNet(rng, ch, inject, "mrn.depth");
  }
  const std::size_t streams = cfg.input_mode == InputMode::kBoth ? 2 : 1;
  const std::size_t fused_channels = ch[1];
  fusion = FusionModule(rng, cfg.fusion, streams * ch[1], streams * ch[3], fused_channels);
  if (cfg.use_ibfm) {
    const auto width = static_cast<std::size_t>(std::lround(cfg.bottleneck_ratio * static_cast<double>(fused_channels)));
    projection.emplace(rng, fused_channels, std::max<std::size_t>(1, width), cfg.dropout);
  }
  head = PredictiveHead(rng, fused_channels, cfg.num_classes);
  if (cfg.discriminator) discriminator.emplace(rng, fused_channels);
  // The fused grid and the level-2 target share a channel count, so the
  // projection starts as the identity and stays frozen.
  std::vector<double> eye(fused_channels * ch[1], 0.0);
  for (std::size_t i = 0; i < fused_channels; ++i) eye[i * ch[1] + i] = 1.0;
  target_projection = Tensor::from({fused_channels, ch[1], 1, 1}, std::move(eye));
}

bool IbIumadModel::uses(Modality m) const {
  if (cfg_.input_mode == InputMode::kBoth) return true;
  return (m == Modality::kRgb) == (cfg_.input_mode == InputMode::kRgb);
}

ParamSet IbIumadModel::parameters() const {
  ParamSet ps;
  if (uses(Modality::kRgb)) encoder_rgb.collect(ps, cfg_.train_encoder);
  if (uses(Modality::kDepth)) encoder_depth.collect(ps, cfg_.train_encoder);
  if (mamba_rgb) mamba_rgb->collect(ps);
  if (mamba_depth) mamba_depth->collect(ps);
  if (uses(Modality::kRgb)) mrn_rgb.collect(ps);
  if (uses(Modality::kDepth)) mrn_depth.collect(ps);
  fusion.collect(ps);
  if (projection) projection->collect(ps);
  head.collect(ps);
  if (discriminator) discriminator->collect(ps);
  ps.add("target_projection", target_projection, false);
  return ps;
}

Tensor IbIumadModel::modality_input(const MultimodalSample& s, Modality m) const {
  if (m == Modality::kRgb) return s.rgb;
  if (!cfg_.depth_three_channel) return s.depth;
  return concat({s.depth, s.depth, s.depth}, 0);
}

EncodedSample IbIumadModel::encode(const MultimodalSample& s) const {
  if (s.height() != cfg_.image_size || s.width() != cfg_.image_size)
    throw DimensionError("sample is " + std::to_string(s.height()) + "×" + std::to_string(s.width()) +
                         ", model expects " + std::to_string(cfg_.image_size));
  EncodedSample out;
  if (uses(Modality::kRgb)) out.rgb = encoder_rgb.encode(modality_input(s, Modality::kRgb));
  if (uses(Modality::kDepth)) out.depth = encoder_depth.encode(modality_input(s, Modality::kDepth));
  return out;
}

ForwardResult IbIumadModel::forward(const EncodedSample& clean, int label, bool train, Rng& rng) const {
  ForwardResult res;

  // Pseudo-anomalies: one shared region/alpha for both streams.
  bool jitter_on = false;
  double alpha = 0.0;
  RelativeRect region;
  if (train) {
    jitter_on = rng.bernoulli(cfg_.jitter.probability);
    if (jitter_on) {
      alpha = rng.uniform(cfg_.jitter.alpha_min, cfg_.jitter.alpha_max);
      region = random_region(rng, cfg_.jitter.area_min, cfg_.jitter.area_max);
    }
  }
  auto perturb = [&](const FeaturePyramid& f) {
    if (!jitter_on) return f;
    JitterResult j = feature_jitter(f, alpha, region, rng.next());
    res.jitter_mask = j.mask;
    return j.features;
  };

  std::vector<ReconstructionOutput> recs;
  std::vector<const ReconstructionOutput*> rec_ptrs;
  Tensor rec_loss;
  const int labels[1] = {label};
  auto run_stream = [&](const FeaturePyramid& clean_f, const std::optional<MambaDecoder>& mamba,
                        const ReconstructionNet& mrn, Tensor& logits, Tensor& cls_loss) {
    const FeaturePyramid abn = perturb(clean_f);
    std::vector<Tensor> injections;
    if (mamba) {
      injections = mamba->forward(abn.level(4));
      logits = mamba->classify(injections.back());
      cls_loss = cross_entropy(logits, labels);
    }
    recs.push_back(mrn.reconstruct(abn, injections));
    const Tensor l = reconstruction_loss(recs.back(), clean_f, cfg_.reconstruct_both_scales);
    rec_loss = rec_loss.defined() ? add(rec_loss, l) : l;
  };
  recs.reserve(2);
  if (clean.rgb) run_stream(*clean.rgb, mamba_rgb, mrn_rgb, res.logits_rgb, res.losses.rgb_cls);
  if (clean.depth) run_stream(*clean.depth, mamba_depth, mrn_depth, res.logits_depth, res.losses.depth_cls);
  if (recs.empty()) throw std::invalid_argument("forward: encoded sample has no streams");
  for (const auto& r : recs) rec_ptrs.push_back(&r);
  res.losses.reconstruction = scale(rec_loss, 1.0 / static_cast<double>(recs.size()));

  res.fused = fusion.fuse(rec_ptrs);
  if (projection) {
    ProjectionOutput p = projection->project(res.fused, train, rng);
    res.z = p.z;
    res.fused_g = p.fused_g;
  } else {
    res.fused_g = res.fused;
  }
  res.predictions = head.predict(res.fused, res.fused_g);

  const FeaturePyramid& target_src = clean.rgb ? *clean.rgb : *clean.depth;
  res.target = conv2d(stop_gradient(target_src.level(2)), target_projection, Tensor{});
  res.losses.fusion = fusion_loss(res.target, res.fused_g);
  if (discriminator) {
    res.disc_logits = discriminator->logits(res.target, res.fused_g);
    if (train) res.losses.discriminator = discriminator_loss(res.disc_logits, res.jitter_mask[1]);
  }
  LossWeights w = cfg_.lambdas;
  if (projection) res.losses.ib = ib_loss(res.predictions.full, res.predictions.bottleneck);
  else w.ib = 0.0;
  res.losses.weights = w;
  return res;
}

IbIumadModel::EvalFeatures IbIumadModel::evaluate(const EncodedSample& enc) const {
  NoGradGuard no_grad;
  Rng unused(0);
  ForwardResult r = forward(enc, 0, false, unused);
  return {r.target, r.fused_g, r.disc_logits.defined() ? sigmoid(r.disc_logits) : Tensor{}};
}

IbIumadModel::EvalFeatures IbIumadModel::evaluate(const MultimodalSample& s) const {
  NoGradGuard no_grad;
  return evaluate(encode(s));
}

}  // namespace ibiumad
