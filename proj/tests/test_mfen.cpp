#include <doctest.h>

#include <cmath>

#include "ibiumad/errors.hpp"
#include "ibiumad/mfen.hpp"

using namespace ibiumad;

namespace {

const ChannelWidths kWidths{4, 6, 8, 10};

}  // namespace

TEST_CASE("encoder pyramid shapes halve at each level") {
  Rng rng(1);
  const Encoder enc(rng, 3, kWidths, "e");
  const FeaturePyramid f = enc.encode(Tensor::randn({3, 64, 64}, rng, 1.0));
  for (int l = 1; l <= 4; ++l) {
    CHECK(f.level(l).dim(0) == kWidths[l - 1]);
    CHECK(f.level(l).dim(1) == (64u >> l));
    CHECK(f.level(l).dim(2) == (64u >> l));
  }
  CHECK_THROWS_AS(enc.encode(Tensor::zeros({3, 40, 40})), DimensionError);
  CHECK_THROWS_AS(enc.encode(Tensor::zeros({1, 64, 64})), DimensionError);
}

TEST_CASE("zero input with zero biases gives zero features") {
  Rng rng(2);
  const Encoder enc(rng, 1, kWidths, "e");
  const FeaturePyramid f = enc.encode(Tensor::zeros({1, 32, 32}));
  for (int l = 1; l <= 4; ++l)
    for (double v : f.level(l).data()) CHECK(v == 0.0);
}

TEST_CASE("identical inputs give identical pyramids") {
  Rng rng(3);
  const Encoder enc(rng, 3, kWidths, "e");
  const Tensor x = Tensor::randn({3, 32, 32}, rng, 1.0);
  const FeaturePyramid a = enc.encode(x), b = enc.encode(x.clone());
  for (int l = 1; l <= 4; ++l)
    CHECK(std::equal(a.level(l).data().begin(), a.level(l).data().end(), b.level(l).data().begin()));
}

TEST_CASE("jitter with alpha zero is the identity") {
  Rng rng(4);
  const Encoder enc(rng, 3, kWidths, "e");
  const FeaturePyramid f = enc.encode(Tensor::randn({3, 32, 32}, rng, 1.0));
  const JitterResult j = feature_jitter(f, 0.0, std::nullopt, 9);
  for (int l = 1; l <= 4; ++l) {
    CHECK(std::equal(f.level(l).data().begin(), f.level(l).data().end(), j.features.level(l).data().begin()));
    for (auto m : j.mask[l - 1]) CHECK(m == 0);
  }
  CHECK_THROWS_AS(feature_jitter(f, -1.0, std::nullopt, 9), ParameterError);
}

TEST_CASE("jitter noise energy matches its Gaussian variance") {
  Rng rng(5);
  const Encoder enc(rng, 3, kWidths, "e");
  const FeaturePyramid f = enc.encode(Tensor::randn({3, 32, 32}, rng, 1.0));
  const Tensor& lvl = f.level(2);
  double mean_abs = 0;
  for (double v : lvl.data()) mean_abs += std::abs(v);
  mean_abs /= static_cast<double>(lvl.numel());
  double energy = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const JitterResult j = feature_jitter(f, 1.0, std::nullopt, seed);
    for (std::size_t i = 0; i < lvl.numel(); ++i) {
      const double d = j.features.level(2).at(i) - lvl.at(i);
      energy += d * d;
    }
  }
  energy /= 100.0 * static_cast<double>(lvl.numel());
  CHECK(std::abs(energy / (mean_abs * mean_abs) - 1.0) < 0.1);
}

TEST_CASE("jitter confined to the left half leaves the right half untouched") {
  Rng rng(6);
  const Encoder enc(rng, 3, kWidths, "e");
  const FeaturePyramid f = enc.encode(Tensor::randn({3, 64, 64}, rng, 1.0));
  const JitterResult j = feature_jitter(f, 2.0, RelativeRect{0.0, 0.0, 1.0, 0.5}, 3);
  for (int l = 1; l <= 4; ++l) {
    const Tensor &a = f.level(l), &b = j.features.level(l);
    const std::size_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
    bool left_changed = false;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const std::size_t i = (c * H + y) * W + x;
          if (x >= W / 2) REQUIRE(a.at(i) == b.at(i));
          else left_changed = left_changed || a.at(i) != b.at(i);
        }
    CHECK(left_changed);
    CHECK(j.mask[l - 1][0] == 1);
    CHECK(j.mask[l - 1][W - 1] == 0);
  }
}

TEST_CASE("random regions respect the area bounds") {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    const RelativeRect r = random_region(rng, 0.1, 0.4);
    const double area = (r.y1 - r.y0) * (r.x1 - r.x0);
    REQUIRE(area >= 0.1 - 1e-12);
    REQUIRE(area <= 0.4 + 1e-12);
    REQUIRE(r.y0 >= 0.0);
    REQUIRE(r.x1 <= 1.0 + 1e-12);
  }
}
