#include <doctest.h>

#include <cmath>

#include "ibiumad/gradcheck.hpp"
#include "ibiumad/mamba.hpp"
#include "ibiumad/optim.hpp"

using namespace ibiumad;

namespace {

void zero(Tensor& t) {
  for (double& v : t.data()) v = 0.0;
}

}  // namespace

TEST_CASE("block reduces to its residual conv when everything else is zero") {
  Rng rng(1);
  MambaBlock b(rng, 3, "m");
  for (Tensor* t : {&b.dw_bias, &b.ln1_gamma, &b.ln1_beta, &b.essm_dw_weight, &b.essm_dw_bias, &b.ssm_b, &b.ssm_c,
                    &b.ssm_d, &b.ln2_gamma, &b.ln2_beta, &b.wq, &b.wk, &b.wv, &b.wo, &b.bo})
    zero(*t);
  zero(b.dw_weight);
  for (std::size_t c = 0; c < 3; ++c) b.dw_weight.data()[c * 9 + 4] = 1.0;
  const Tensor x = Tensor::randn({3, 4, 6}, rng, 1.0);
  const Tensor y = b.forward(x);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));
}

TEST_CASE("block gradients match finite differences") {
  Rng rng(2);
  MambaBlock b(rng, 4, "m");
  const Tensor x = Tensor::randn({4, 4, 4}, rng, 1.0), w = Tensor::randn({4, 4, 4}, rng, 1.0);
  ParamSet ps;
  b.collect(ps);
  std::vector<Tensor> inputs{x};
  for (const auto& p : ps.items()) inputs.push_back(p.tensor);
  CHECK(finite_diff_check([&] { return sum(mul(b.forward(x), w)); }, inputs).max_rel_error < 1e-4);
}

TEST_CASE("decay stays inside (0, 1) and the scan has unit DC gain") {
  Rng rng(3);
  MambaBlock b(rng, 2, "m");
  b.decay_logit.data()[0] = 60.0;
  b.decay_logit.data()[1] = -60.0;
  const Tensor a = b.decay();
  CHECK(a.at(0) < 1.0);
  CHECK(a.at(0) == doctest::Approx(MambaBlock::kMaxDecay));
  CHECK(a.at(1) >= 0.0);
  // A long constant sequence settles at b·x regardless of decay.
  const Tensor gain = b.input_gain();
  for (std::size_t c = 0; c < 2; ++c) {
    const double dc = gain.at(c) / (1.0 - a.at(c));
    CHECK(dc == doctest::Approx(b.ssm_b.at(c)));
  }
}

TEST_CASE("decoder runs deterministically under a fixed seed") {
  Rng r1(4), r2(4);
  const MambaDecoder d1(r1, 4, 3, "d"), d2(r2, 4, 3, "d");
  Rng rx(5);
  const Tensor x = Tensor::randn({4, 4, 4}, rx, 1.0);
  const auto o1 = d1.forward(x), o2 = d2.forward(x);
  REQUIRE(o1.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::equal(o1[i].data().begin(), o1[i].data().end(), o2[i].data().begin()));
}

TEST_CASE("classifier examples") {
  Rng rng(6);
  MambaDecoder d(rng, 2, 2, "d");
  zero(d.cls_bias);
  const Tensor uniform = softmax(d.classify(Tensor::zeros({2, 2, 2})));
  CHECK(uniform.at(0) == doctest::Approx(0.5));
  // Hand-set weights: logit_k = Σ_c w[c][k]·mean_c.
  d.cls_weight = Tensor::from({2, 2}, {1.0, -1.0, 0.5, 2.0});
  const Tensor x = Tensor::from({2, 1, 2}, {1.0, 3.0, -2.0, 0.0});  // channel means 2, -1
  const Tensor logits = d.classify(x);
  const double l0 = 1.0 * 2 + 0.5 * -1, l1 = -1.0 * 2 + 2.0 * -1;
  CHECK(logits.at(0) == doctest::Approx(l0));
  CHECK(logits.at(1) == doctest::Approx(l1));
  CHECK((logits.at(0) - logits.at(1) > 0) == (l0 - l1 > 0));
}

TEST_CASE("disentangle loss examples") {
  const int y[1] = {1};
  const Tensor perfect = Tensor::from({1, 3}, {-900.0, 0.0, -900.0});
  const DisentangleLosses p = disentangle_loss(perfect, perfect, y);
  CHECK(p.rgb.item() == doctest::Approx(0.0));
  CHECK(p.depth.item() == doctest::Approx(0.0));
  const DisentangleLosses u = disentangle_loss(Tensor::zeros({1, 10}), Tensor::zeros({1, 10}), y);
  CHECK(u.rgb.item() == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  CHECK(u.depth.item() == doctest::Approx(std::log(10.0)).epsilon(1e-14));
}

TEST_CASE("one SGD step lowers the classification loss on a separable toy batch") {
  Rng rng(7);
  MambaDecoder d(rng, 4, 2, "d");
  const Tensor pos = Tensor::full({4, 4, 4}, 1.0), neg = Tensor::full({4, 4, 4}, -1.0);
  const int l0[1] = {0}, l1[1] = {1};
  auto loss = [&] {
    return add(cross_entropy(d.classify(d.forward(pos).back()), l0),
               cross_entropy(d.classify(d.forward(neg).back()), l1));
  };
  ParamSet ps;
  d.collect(ps);
  const double before = loss().item();
  ps.zero_grad();
  loss().backward();
  Sgd opt(0.01, 0.0);
  opt.step(ps.trainable());
  CHECK(loss().item() < before);
}
