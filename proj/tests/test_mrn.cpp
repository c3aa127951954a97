#include <doctest.h>

#include "ibiumad/errors.hpp"
#include "ibiumad/gradcheck.hpp"
#include "ibiumad/mrn.hpp"
#include "ibiumad/optim.hpp"

using namespace ibiumad;

namespace {

const ChannelWidths kWidths{4, 6, 8, 10};

FeaturePyramid random_pyramid(Rng& rng, std::size_t size) {
  FeaturePyramid f;
  for (int l = 1; l <= 4; ++l) f.level(l) = Tensor::randn({kWidths[l - 1], size >> l, size >> l}, rng, 1.0);
  return f;
}

std::vector<Tensor> injections(Rng& rng, std::size_t ch, std::size_t side) {
  std::vector<Tensor> x;
  for (int i = 0; i < 4; ++i) x.push_back(Tensor::randn({ch, side, side}, rng, 1.0));
  return x;
}

}  // namespace

TEST_CASE("zero weights give zero outputs of the right shapes") {
  Rng rng(1);
  ReconstructionNet net(rng, kWidths, 10, "r");
  for (auto* group : {&net.weights, &net.biases})
    for (Tensor& t : *group)
      for (double& v : t.data()) v = 0.0;
  const FeaturePyramid f = random_pyramid(rng, 32);
  const auto x = injections(rng, 10, 2);
  const ReconstructionOutput r = net.reconstruct(f, x);
  CHECK(r.rec2.shape() == f.level(2).shape());
  CHECK(r.rec4.shape() == f.level(4).shape());
  for (double v : r.rec2.data()) CHECK(v == 0.0);
  for (double v : r.rec4.data()) CHECK(v == 0.0);
}

TEST_CASE("injection count and shapes are validated") {
  Rng rng(2);
  const ReconstructionNet with(rng, kWidths, 10, "r"), without(rng, kWidths, 0, "r");
  const FeaturePyramid f = random_pyramid(rng, 32);
  CHECK_NOTHROW(without.reconstruct(f, {}));
  CHECK_THROWS_AS(with.reconstruct(f, {}), DimensionError);
  CHECK_THROWS_AS(with.reconstruct(f, injections(rng, 9, 2)), DimensionError);
}

TEST_CASE("reconstruction gradients match finite differences") {
  Rng rng(3);
  const ReconstructionNet net(rng, kWidths, 10, "r");
  const FeaturePyramid f = random_pyramid(rng, 32), clean = random_pyramid(rng, 32);
  const auto x = injections(rng, 10, 2);
  ParamSet ps;
  net.collect(ps);
  std::vector<Tensor> inputs = ps.trainable();
  for (const Tensor& t : x) inputs.push_back(t);
  const auto loss = [&] { return reconstruction_loss(net.reconstruct(f, x), clean); };
  CHECK(finite_diff_check(loss, inputs, 1e-5, 25).max_rel_error < 1e-4);
}

TEST_CASE("training on one pair cuts the loss by at least half") {
  Rng rng(4);
  const ReconstructionNet net(rng, kWidths, 0, "r");
  const FeaturePyramid noisy = random_pyramid(rng, 32);
  FeaturePyramid clean;
  for (int l = 1; l <= 4; ++l) clean.level(l) = relu(noisy.level(l));
  ParamSet ps;
  net.collect(ps);
  Sgd opt(0.05, 0.9);
  const auto loss = [&] { return reconstruction_loss(net.reconstruct(noisy, {}), clean); };
  const double before = loss().item();
  for (int i = 0; i < 200; ++i) {
    ps.zero_grad();
    loss().backward();
    opt.step(ps.trainable());
  }
  CHECK(loss().item() <= 0.5 * before);
}

TEST_CASE("reconstruction loss examples") {
  Rng rng(5);
  const FeaturePyramid clean = random_pyramid(rng, 32);
  ReconstructionOutput exact{clean.level(2), clean.level(4), {}};
  CHECK(reconstruction_loss(exact, clean).item() == 0.0);
  ReconstructionOutput shifted{add_scalar(clean.level(2), 1.0), clean.level(4), {}};
  CHECK(reconstruction_loss(shifted, clean).item() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(reconstruction_loss(shifted, clean, false).item() == 0.0);
  for (int t = 0; t < 20; ++t) {
    ReconstructionOutput r{Tensor::randn(clean.level(2).shape(), rng, 1.0), Tensor::randn(clean.level(4).shape(), rng, 1.0), {}};
    REQUIRE(reconstruction_loss(r, clean).item() >= 0.0);
  }
}
