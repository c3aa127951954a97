#include <doctest.h>

#include <cmath>

#include "ibiumad/errors.hpp"
#include "ibiumad/ibfm.hpp"

using namespace ibiumad;

namespace {

void zero(Tensor& t) {
  for (double& v : t.data()) v = 0.0;
}

}  // namespace

TEST_CASE("addition fusion with a zero second map is the projected first map") {
  Rng rng(1);
  const FusionModule f(rng, FusionKind::kAddition, 4, 6, 5);
  const Tensor first = Tensor::randn({4, 8, 8}, rng, 1.0);
  const Tensor out = f.fuse({first, Tensor::zeros({6, 2, 2})});
  const Tensor expect = conv2d(first, f.p1_weight, f.p1_bias);
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == doctest::Approx(expect.at(i)).epsilon(1e-14));
}

TEST_CASE("cross attention over a single key returns that key's value everywhere") {
  Rng rng(2);
  FusionModule f(rng, FusionKind::kCrossAttention, 4, 3, 5);
  zero(f.skip_weight);
  zero(f.skip_bias);
  const Tensor first = Tensor::randn({4, 4, 4}, rng, 1.0);
  const Tensor second = Tensor::randn({3, 1, 1}, rng, 1.0);
  const Tensor out = f.fuse({first, second});
  const Tensor value = matmul(tokens_from_map(second), f.wv);
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t p = 0; p < 16; ++p) CHECK(out.at(c * 16 + p) == doctest::Approx(value.at(c)).epsilon(1e-14));
}

TEST_CASE("every fusion kind yields a finite map on the first grid") {
  for (FusionKind k : {FusionKind::kAddition, FusionKind::kConcatFc, FusionKind::kLinearGlu, FusionKind::kCrossAttention}) {
    Rng rng(3);
    const FusionModule f(rng, k, 6, 8, 4);
    const Tensor out = f.fuse({Tensor::randn({6, 8, 8}, rng, 1.0), Tensor::randn({8, 2, 2}, rng, 1.0)});
    CHECK(out.shape() == Shape{4, 8, 8});
    for (double v : out.data()) REQUIRE(std::isfinite(v));
    CHECK(parse_fusion_kind(fusion_kind_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_fusion_kind("sum"), ConfigError);
  Rng rng(4);
  const FusionModule f(rng, FusionKind::kConcatFc, 6, 8, 4);
  CHECK_THROWS_AS(f.fuse({Tensor::zeros({5, 8, 8}), Tensor::zeros({8, 2, 2})}), DimensionError);
  CHECK_THROWS_AS(f.fuse({Tensor::zeros({6, 8, 8}), Tensor::zeros({8, 3, 3})}), DimensionError);
}

TEST_CASE("projection with zero weights outputs relu of the last bias") {
  Rng rng(5);
  IbProjection p(rng, 4, 2, 0.1);
  zero(p.w1);
  zero(p.w2);
  p.b2 = Tensor::from({4}, {0.5, -1.0, 2.0, 0.0});
  const ProjectionOutput out = p.project(Tensor::randn({4, 3, 3}, rng, 1.0), false, rng);
  const double expect[4] = {0.5, 0.0, 2.0, 0.0};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 9; ++i) CHECK(out.fused_g.at(c * 9 + i) == expect[c]);
}

TEST_CASE("projection shapes follow the bottleneck width") {
  Rng rng(6);
  for (std::size_t ch = 2; ch <= 11; ++ch) {
    const std::size_t dz = ch / 2;
    const IbProjection p(rng, ch, dz, 0.2);
    const ProjectionOutput out = p.project(Tensor::randn({ch, 3, 5}, rng, 1.0), true, rng);
    CHECK(out.z.shape() == Shape{15, dz});
    CHECK(out.fused_g.shape() == Shape{ch, 3, 5});
  }
  CHECK_THROWS_AS(IbProjection(rng, 4, 4, 0.0), ConfigError);
  CHECK_THROWS_AS(IbProjection(rng, 4, 0, 0.0), ConfigError);
}

TEST_CASE("predictive head agrees on identical maps and stops the full branch") {
  Rng rng(7);
  const PredictiveHead head(rng, 4, 3);
  Tensor a = Tensor::randn({4, 2, 2}, rng, 1.0, true);
  const PredictiveDistributions same = head.predict(a, a);
  CHECK(ib_loss(same.full, same.bottleneck).item() == doctest::Approx(0.0).epsilon(1e-15));
  double row = 0;
  for (double v : same.bottleneck.data()) row += v;
  CHECK(row == doctest::Approx(1.0));

  const Tensor g = Tensor::randn({4, 2, 2}, rng, 1.0);
  const PredictiveDistributions d = head.predict(a, g);
  CHECK_FALSE(d.full.requires_grad());
  sum(square(d.full)).backward();
  CHECK_FALSE(a.has_grad());
}

TEST_CASE("ib and fusion loss examples") {
  CHECK(ib_loss(Tensor::from({1, 2}, {1.0, 0.0}), Tensor::from({1, 2}, {0.5, 0.5})).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const Tensor p = Tensor::from({1, 3}, {0.2, 0.3, 0.5});
  CHECK(ib_loss(p, p).item() == 0.0);
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const Tensor x = softmax(Tensor::randn({4, 5}, rng, 2.0)), y = softmax(Tensor::randn({4, 5}, rng, 2.0));
    REQUIRE(ib_loss(x, y).item() >= 0.0);
  }
  const Tensor t = Tensor::zeros({2, 2, 2});
  CHECK(fusion_loss(t, Tensor::full({2, 2, 2}, 1.0)).item() == doctest::Approx(2.0));
  CHECK(fusion_loss(t, Tensor::full({2, 2, 2}, 3.0)).item() == doctest::Approx(18.0));
  CHECK(fusion_loss(t, t).item() == 0.0);
}

TEST_CASE("total loss is the weighted sum of its components") {
  LossBundle b{Tensor::scalar(0.5), Tensor::scalar(0.3), Tensor::scalar(0.1), Tensor::scalar(0.2), Tensor::scalar(0.0), {}, {}};
  CHECK(total_loss(b).item() == doctest::Approx(1.1).epsilon(1e-14));
  LossBundle zeros{Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0), {}, {}};
  CHECK(total_loss(zeros).item() == 0.0);
  b.weights = {2.0, 1.0, 1.0, 0.0};
  CHECK(total_loss(b).item() == doctest::Approx(1.1 + 0.5 - 0.2).epsilon(1e-14));
  LossBundle partial{Tensor{}, Tensor{}, Tensor::scalar(0.4), Tensor{}, Tensor::scalar(0.1), {}, {}};
  CHECK(total_loss(partial).item() == doctest::Approx(0.5));
}

TEST_CASE("discriminator loss is a per-cell binary cross-entropy") {
  const Tensor zero = Tensor::zeros({1, 2, 2});
  const std::vector<std::uint8_t> mask{1, 0, 0, 1};
  CHECK(discriminator_loss(zero, mask).item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(discriminator_loss(zero, {}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const Tensor sure = Tensor::from({1, 2, 2}, {30.0, -30.0, -30.0, 30.0});
  CHECK(discriminator_loss(sure, mask).item() < 1e-12);
  const Tensor x = Tensor::from({1, 1, 2}, {0.7, -1.3});
  const std::vector<std::uint8_t> m2{1, 0};
  const double expect = 0.5 * (std::log1p(std::exp(-0.7)) + std::log1p(std::exp(-1.3)));
  CHECK(discriminator_loss(x, m2).item() == doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(discriminator_loss(x, mask), DimensionError);
}

TEST_CASE("discriminator reads the residual without training the fusion path") {
  Rng rng(9);
  const Discriminator d(rng, 3);
  Tensor fused_g = Tensor::randn({3, 2, 2}, rng, 1.0, true);
  const Tensor target = Tensor::randn({3, 2, 2}, rng, 1.0);
  const Tensor logits = d.logits(target, fused_g);
  CHECK(logits.shape() == Shape{1, 2, 2});
  const std::vector<std::uint8_t> mask{1, 0, 0, 0};
  discriminator_loss(logits, mask).backward();
  CHECK_FALSE(fused_g.has_grad());
}
