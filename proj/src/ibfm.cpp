#include "ibiumad/ibfm.hpp"

#include <cmath>

namespace ibiumad {

const char* fusion_kind_name(FusionKind k) {
  switch (k) {
    case FusionKind::kAddition: return "addition";
    case FusionKind::kConcatFc: return "concatfc";
    case FusionKind::kLinearGlu: return "linearglu";
    case FusionKind::kCrossAttention: return "cross_attention";
  }
  return "?";
}

FusionKind parse_fusion_kind(std::string_view name) {
  if (name == "addition") return FusionKind::kAddition;
  if (name == "concatfc") return FusionKind::kConcatFc;
  if (name == "linearglu") return FusionKind::kLinearGlu;
  if (name == "cross_attention") return FusionKind::kCrossAttention;
  throw ConfigError("unknown fusion kind '" + std::string(name) +
                    "' (expected addition|concatfc|linearglu|cross_attention)");
}

CascadedFeatures cascade(const std::vector<const ReconstructionOutput*>& recs) {
  if (recs.empty()) throw DimensionError("cascade: no reconstructions");
  std::vector<Tensor> r2, r4;
  for (const auto* r : recs) {
    r2.push_back(r->rec2);
    r4.push_back(r->rec4);
  }
  if (recs.size() == 1) return {r2[0], r4[0]};
  return {concat(r2, 0), concat(r4, 0)};
}

namespace {

Tensor conv1x1_weight(Rng& rng, std::size_t cout, std::size_t cin) {
  return Tensor::randn({cout, cin, 1, 1}, rng, std::sqrt(2.0 / static_cast<double>(cin + cout)));
}

}  // namespace

FusionModule::FusionModule(Rng& rng, FusionKind kind, std::size_t first_channels, std::size_t second_channels,
                           std::size_t out_channels, std::size_t attn_dim)
    : kind_(kind),
      first_channels_(first_channels),
      second_channels_(second_channels),
      out_channels_(out_channels),
      attn_dim_(attn_dim == 0 ? out_channels : attn_dim) {
  const std::size_t joint = first_channels + second_channels;
  switch (kind) {
    case FusionKind::kAddition:
      p1_weight = conv1x1_weight(rng, out_channels, first_channels);
      p1_bias = Tensor::zeros({out_channels});
      p2_weight = conv1x1_weight(rng, out_channels, second_channels);
      break;
    case FusionKind::kConcatFc:
      fc_weight = conv1x1_weight(rng, out_channels, joint);
      fc_bias = Tensor::zeros({out_channels});
      break;
    case FusionKind::kLinearGlu:
      fc_weight = conv1x1_weight(rng, out_channels, joint);
      fc_bias = Tensor::zeros({out_channels});
      gate_weight = conv1x1_weight(rng, out_channels, joint);
      gate_bias = Tensor::zeros({out_channels});
      break;
    case FusionKind::kCrossAttention:
      wq = dense_weight(rng, first_channels, attn_dim_);
      wk = dense_weight(rng, second_channels, attn_dim_);
      wv = dense_weight(rng, second_channels, out_channels);
      skip_weight = conv1x1_weight(rng, out_channels, first_channels);
      skip_bias = Tensor::zeros({out_channels});
      break;
  }
}

Tensor FusionModule::fuse(const CascadedFeatures& in) const {
  const Tensor& a = in.first;
  const Tensor& b = in.second;
  if (a.rank() != 3 || b.rank() != 3) throw DimensionError("fuse: inputs must be C×H×W");
  if (a.dim(0) != first_channels_ || b.dim(0) != second_channels_)
    throw DimensionError("fuse: channel counts " + shape_str(a.shape()) + ", " + shape_str(b.shape()) +
                         " do not match module");
  if (a.dim(1) % b.dim(1) != 0 || a.dim(2) % b.dim(2) != 0 || a.dim(1) / b.dim(1) != a.dim(2) / b.dim(2))
    throw DimensionError("fuse: second grid must divide the first evenly");
  const std::size_t factor = a.dim(1) / b.dim(1);

  switch (kind_) {
    case FusionKind::kAddition:
      return add(conv2d(a, p1_weight, p1_bias), conv2d(upsample_nearest(b, factor), p2_weight, Tensor{}));
    case FusionKind::kConcatFc:
      return conv2d(concat({a, upsample_nearest(b, factor)}, 0), fc_weight, fc_bias);
    case FusionKind::kLinearGlu: {
      const Tensor x = concat({a, upsample_nearest(b, factor)}, 0);
      return mul(sigmoid(conv2d(x, gate_weight, gate_bias)), conv2d(x, fc_weight, fc_bias));
    }
    case FusionKind::kCrossAttention: {
      const Tensor q = matmul(tokens_from_map(a), wq);
      const Tensor kv = tokens_from_map(b);
      const Tensor scores = scale(matmul(q, transpose(matmul(kv, wk))), 1.0 / std::sqrt(static_cast<double>(attn_dim_)));
      const Tensor attended = map_from_tokens(matmul(softmax(scores), matmul(kv, wv)), a.dim(1), a.dim(2));
      return add(conv2d(a, skip_weight, skip_bias), attended);
    }
  }
  throw ConfigError("fuse: unhandled fusion kind");
}

void FusionModule::collect(ParamSet& out) const {
  const std::string p = std::string("fusion.") + fusion_kind_name(kind_);
  auto put = [&](const char* n, const Tensor& t) {
    if (t.defined()) out.add(p + "." + n, t);
  };
  put("p1.weight", p1_weight);
  put("p1.bias", p1_bias);
  put("p2.weight", p2_weight);
  put("fc.weight", fc_weight);
  put("fc.bias", fc_bias);
  put("gate.weight", gate_weight);
  put("gate.bias", gate_bias);
  put("skip.weight", skip_weight);
  put("skip.bias", skip_bias);
  put("wq", wq);
  put("wk", wk);
  put("wv", wv);
}

IbProjection::IbProjection(Rng& rng, std::size_t channels, std::size_t bottleneck, double dropout)
    : channels_(channels), bottleneck_(bottleneck), dropout_(dropout) {
  if (bottleneck == 0 || bottleneck >= channels)
    throw ConfigError("ib projection: bottleneck width " + std::to_string(bottleneck) +
                      " must be in (0, " + std::to_string(channels) + ")");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("ib projection: dropout must be in [0,1)");
  w1 = Tensor::randn({channels, bottleneck}, rng, std::sqrt(2.0 / static_cast<double>(channels)));
  b1 = Tensor::full({bottleneck}, 0.1);
  // The re-expansion starts near zero: an initial overshoot drives every
  // bottleneck unit negative within a few steps and they never recover.
  w2 = Tensor::randn({bottleneck, channels}, rng, 0.01 * std::sqrt(2.0 / static_cast<double>(bottleneck)));
  b2 = Tensor::full({channels}, 0.1);
}

ProjectionOutput IbProjection::project(const Tensor& fused, bool train, Rng& rng) const {
  if (fused.rank() != 3 || fused.dim(0) != channels_)
    throw DimensionError("ib projection: expected " + std::to_string(channels_) + "×H×W, got " + shape_str(fused.shape()));
  const Tensor tokens = tokens_from_map(fused);
  const Tensor z = relu(dropout(linear(tokens, w1, b1), dropout_, train, rng));
  const Tensor g = relu(dropout(linear(z, w2, b2), dropout_, train, rng));
  return {z, map_from_tokens(g, fused.dim(1), fused.dim(2))};
}

void IbProjection::collect(ParamSet& out) const {
  out.add("ib.proj1.weight", w1);
  out.add("ib.proj1.bias", b1);
  out.add("ib.proj2.weight", w2);
  out.add("ib.proj2.bias", b2);
}

PredictiveHead::PredictiveHead(Rng& rng, std::size_t channels, std::size_t num_classes) {
  weight = dense_weight(rng, channels, num_classes);
  bias = Tensor::zeros({num_classes});
}

PredictiveDistributions PredictiveHead::predict(const Tensor& fused, const Tensor& fused_g) const {
  const Tensor full = softmax(linear(global_avg_pool(fused), weight, bias));
  const Tensor bott = softmax(linear(global_avg_pool(fused_g), weight, bias));
  return {stop_gradient(full), bott};
}

void PredictiveHead::collect(ParamSet& out) const {
  out.add("ib.head.weight", weight);
  out.add("ib.head.bias", bias);
}

Discriminator::Discriminator(Rng& rng, std::size_t channels) {
  weight = conv1x1_weight(rng, 1, channels);
  bias = Tensor::zeros({1});
}

Tensor Discriminator::logits(const Tensor& target, const Tensor& fused_g) const {
  return conv2d(stop_gradient(sub(target, fused_g)), weight, bias);
}

void Discriminator::collect(ParamSet& out) const {
  out.add("discriminator.weight", weight);
  out.add("discriminator.bias", bias);
}

Tensor discriminator_loss(const Tensor& logits, std::span<const std::uint8_t> mask) {
  if (logits.rank() != 3 || logits.dim(0) != 1) throw DimensionError("discriminator_loss: expected 1×H×W logits");
  const std::size_t n = logits.numel();
  if (!mask.empty() && mask.size() != n) throw DimensionError("discriminator_loss: mask size mismatch");
  // Binary cross-entropy as a two-way softmax over (0, logit) per cell.
  const Tensor cells = reshape(logits, {n, 1});
  const Tensor pairs = concat({Tensor::zeros({n, 1}), cells}, 1);
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) labels[i] = mask[i] ? 1 : 0;
  return cross_entropy(pairs, labels);
}

Tensor ib_loss(const Tensor& y_full, const Tensor& y_bottleneck) { return kl_divergence(y_full, y_bottleneck); }

Tensor fusion_loss(const Tensor& target, const Tensor& fused_g) {
  if (target.rank() != 3) throw DimensionError("fusion_loss: expected C×H×W");
  return mse(target, fused_g, static_cast<double>(target.dim(1) * target.dim(2)));
}

Tensor total_loss(const LossBundle& b) {
  Tensor total = Tensor::scalar(0.0);
  auto acc = [&](const Tensor& t, double w) {
    if (t.defined() && w != 0.0) total = add(total, scale(t, w));
  };
  acc(b.rgb_cls, b.weights.rgb_cls);
  acc(b.depth_cls, b.weights.depth_cls);
  acc(b.fusion, b.weights.fusion);
  acc(b.ib, b.weights.ib);
  acc(b.reconstruction, 1.0);
  acc(b.discriminator, 1.0);
  return total;
}

}  // namespace ibiumad
