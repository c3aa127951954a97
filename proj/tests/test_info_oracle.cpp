#include <doctest.h>

#include <cmath>

#include "ibiumad/errors.hpp"
#include "ibiumad/info_oracle.hpp"
#include "ibiumad/oracles.hpp"
#include "ibiumad/rng.hpp"
#include "ibiumad/verify.hpp"

using namespace ibiumad;
using namespace ibiumad::info;

namespace {

Distribution random_dist(Rng& rng, std::size_t n) {
  Distribution p(n);
  double s = 0;
  for (double& v : p) s += (v = rng.uniform(0.05, 1.0));
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("mutual information examples") {
  CHECK(mutual_information({2, 2, {0.25, 0.25, 0.25, 0.25}}) == doctest::Approx(0.0));
  CHECK(mutual_information({2, 2, {0.5, 0.0, 0.0, 0.5}}) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_dist(rng, 9);
    REQUIRE(std::abs(mutual_information({3, 3, p}) - oracle::mi_from_entropies(p, 3, 3)) < 1e-12);
  }
}

TEST_CASE("conditional mutual information examples") {
  Rng rng(2);
  // Y independent of (F, G): conditioning changes nothing.
  const auto pfg = random_dist(rng, 9);
  const Distribution py{0.3, 0.7};
  std::vector<double> joint;
  for (double v : pfg)
    for (double y : py) joint.push_back(v * y);
  CHECK(conditional_mi(DiscreteJoint(3, 3, 2, joint)) == doctest::Approx(mutual_information({3, 3, pfg})).epsilon(1e-12));

  // G == Y: once Y is known G carries nothing.
  std::vector<double> gy(3 * 2 * 2, 0.0);
  const auto pf = random_dist(rng, 3);
  for (std::size_t f = 0; f < 3; ++f) {
    gy[(f * 2 + 0) * 2 + 0] = pf[f] * 0.4;
    gy[(f * 2 + 1) * 2 + 1] = pf[f] * 0.6;
  }
  CHECK(std::abs(conditional_mi(DiscreteJoint(3, 2, 2, gy))) < 1e-12);

  for (int t = 0; t < 20; ++t) {
    const auto q = random_dist(rng, 18);
    REQUIRE(std::abs(conditional_mi(DiscreteJoint(3, 3, 2, q)) - oracle::cmi_from_entropies(q, 3, 3, 2)) < 1e-12);
  }
}

TEST_CASE("chain rule examples") {
  const Distribution pf{0.2, 0.3, 0.5};
  const Conditional pyf{{0.9, 0.1}, {0.5, 0.5}, {0.2, 0.8}};
  const ChainRuleCheck id = verify_corollary1(pf, DeterministicChannel{{0, 1, 2}, 3}, pyf);
  CHECK(id.residual < 1e-10);
  CHECK(id.i_fg == doctest::Approx(entropy(pf)).epsilon(1e-12));
  const ChainRuleCheck constant = verify_corollary1(pf, DeterministicChannel{{0, 0, 0}, 1}, pyf);
  CHECK(std::abs(constant.i_fg) < 1e-15);
  CHECK(std::abs(constant.i_fg_given_y) < 1e-15);
  CHECK(std::abs(constant.i_gy) < 1e-15);
}

TEST_CASE("channel matrices must be one-hot") {
  CHECK_NOTHROW(DeterministicChannel::from_matrix({{0.0, 1.0}, {1.0, 0.0}}));
  CHECK_THROWS_AS(DeterministicChannel::from_matrix({{0.5, 0.5}, {1.0, 0.0}}), PreconditionError);
  CHECK_THROWS_AS(verify_corollary1({0.5, 0.5}, Conditional{{0.3, 0.7}, {0.0, 1.0}}, {{1.0, 0.0}, {0.0, 1.0}}),
                  PreconditionError);
}

TEST_CASE("predictive gap examples") {
  const Distribution pf{0.25, 0.25, 0.5};
  const Conditional pyf{{0.9, 0.1}, {0.9, 0.1}, {0.2, 0.8}};
  const PredictiveGap inj = verify_corollary2(pf, pyf, DeterministicChannel{{2, 0, 1}, 3});
  CHECK(inj.kl_max == 0.0);
  CHECK(std::abs(inj.mi_gap) < 1e-12);
  const PredictiveGap same = verify_corollary2(pf, pyf, DeterministicChannel{{0, 0, 1}, 2});
  CHECK(same.kl_max == 0.0);
  CHECK(std::abs(same.mi_gap) < 1e-10);
  const PredictiveGap diff = verify_corollary2(pf, pyf, DeterministicChannel{{0, 1, 1}, 2});
  CHECK(diff.kl_max > 0.0);
  CHECK(diff.mi_gap > 0.0);
}

TEST_CASE("randomized corollary sweeps pass") {
  const verify::Suite s = verify::information_suite(5);
  for (const auto& c : s.checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
  CHECK(s.seconds < 30.0);
}
