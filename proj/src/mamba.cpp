#include "ibiumad/mamba.hpp"

#include <cmath>

namespace ibiumad {
namespace {

Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  return map_from_tokens(layer_norm(tokens_from_map(x), gamma, beta), x.dim(1), x.dim(2));
}

}  // namespace

MambaBlock::MambaBlock(Rng& rng, std::size_t channels, std::string name)
    : channels_(channels), name_(std::move(name)) {
  const std::size_t C = channels;
  dw_weight = conv_weight(rng, C, 1, 3);
  dw_bias = Tensor::zeros({C});
  ln1_gamma = Tensor::full({C}, 1.0);
  ln1_beta = Tensor::zeros({C});
  essm_dw_weight = conv_weight(rng, C, 1, 3);
  essm_dw_bias = Tensor::zeros({C});
  // Decays spread over (0.27, 0.88) so channels see different memory lengths.
  std::vector<double> logits(C);
  for (std::size_t c = 0; c < C; ++c) logits[c] = -1.0 + 3.0 * static_cast<double>(c) / std::max<std::size_t>(1, C - 1);
  decay_logit = Tensor::from({C}, std::move(logits));
  ssm_b = Tensor::full({C}, 1.0);
  ssm_c = Tensor::randn({C}, rng, 0.5);
  ssm_d = Tensor::full({C}, 1.0);
  ln2_gamma = Tensor::full({C}, 1.0);
  ln2_beta = Tensor::zeros({C});
  wq = dense_weight(rng, C, C);
  wk = dense_weight(rng, C, C);
  wv = dense_weight(rng, C, C);
  wo = dense_weight(rng, C, C);
  bo = Tensor::zeros({C});
}

Tensor MambaBlock::state_path(const Tensor& x) const {
  const Tensor normed = channel_norm(x, ln1_gamma, ln1_beta);
  const Tensor mixed = conv2d(normed, essm_dw_weight, essm_dw_bias, channels_);
  return es2d(mixed, decay(), input_gain(), ssm_c, ssm_d);
}

Tensor MambaBlock::input_gain() const {
  const Tensor a = decay();
  return mul(add_scalar(scale(a, -1.0), 1.0), ssm_b);
}

Tensor MambaBlock::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != channels_)
    throw DimensionError(name_ + ": expected " + std::to_string(channels_) + " channels, got " + shape_str(x.shape()));
  const Tensor skip = conv2d(x, dw_weight, dw_bias, channels_);
  const Tensor state = state_path(x);
  const std::size_t h = x.dim(1), w = x.dim(2);
  const Tensor tokens = layer_norm(tokens_from_map(state), ln2_gamma, ln2_beta);
  const Tensor q = matmul(tokens, wq), k = matmul(tokens, wk), v = matmul(tokens, wv);
  const Tensor attn = softmax(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(channels_))));
  const Tensor mixed = linear(matmul(attn, v), wo, bo);
  return add(map_from_tokens(mixed, h, w), skip);
}

void MambaBlock::collect(ParamSet& out) const {
  out.add(name_ + ".dw.weight", dw_weight);
  out.add(name_ + ".dw.bias", dw_bias);
  out.add(name_ + ".ln1.gamma", ln1_gamma);
  out.add(name_ + ".ln1.beta", ln1_beta);
  out.add(name_ + ".essm.dw.weight", essm_dw_weight);
  out.add(name_ + ".essm.dw.bias", essm_dw_bias);
  out.add(name_ + ".essm.decay_logit", decay_logit);
  out.add(name_ + ".essm.b", ssm_b);
  out.add(name_ + ".essm.c", ssm_c);
  out.add(name_ + ".essm.d", ssm_d);
  out.add(name_ + ".ln2.gamma", ln2_gamma);
  out.add(name_ + ".ln2.beta", ln2_beta);
  out.add(name_ + ".attn.wq", wq);
  out.add(name_ + ".attn.wk", wk);
  out.add(name_ + ".attn.wv", wv);
  out.add(name_ + ".attn.wo", wo);
  out.add(name_ + ".attn.bo", bo);
}

MambaDecoder::MambaDecoder(Rng& rng, std::size_t channels, std::size_t num_classes, std::string name)
    : name_(std::move(name)) {
  for (std::size_t i = 0; i < kBlocks; ++i) blocks[i] = MambaBlock(rng, channels, name_ + ".block" + std::to_string(i + 1));
  cls_weight = dense_weight(rng, channels, num_classes);
  cls_bias = Tensor::zeros({num_classes});
}

std::vector<Tensor> MambaDecoder::forward(const Tensor& x0) const {
  std::vector<Tensor> outs;
  outs.reserve(kBlocks);
  Tensor x = x0;
  for (const auto& b : blocks) {
    x = b.forward(x);
    outs.push_back(x);
  }
  return outs;
}

Tensor MambaDecoder::classify(const Tensor& x_last) const {
  return linear(global_avg_pool(x_last), cls_weight, cls_bias);
}

void MambaDecoder::collect(ParamSet& out) const {
  for (const auto& b : blocks) b.collect(out);
  out.add(name_ + ".classifier.weight", cls_weight);
  out.add(name_ + ".classifier.bias", cls_bias);
}

DisentangleLosses disentangle_loss(const Tensor& logits_rgb, const Tensor& logits_depth,
                                   std::span<const int> labels) {
  return {cross_entropy(logits_rgb, labels), cross_entropy(logits_depth, labels)};
}

}  // namespace ibiumad
