#include <doctest.h>

#include <cmath>
#include <limits>

#include "ibiumad/errors.hpp"
#include "ibiumad/metrics.hpp"
#include "ibiumad/oracles.hpp"
#include "ibiumad/rng.hpp"
#include "ibiumad/scoring.hpp"

using namespace ibiumad;

namespace {

using Bytes = std::vector<std::uint8_t>;

std::size_t pick(Rng& rng, int n) { return static_cast<std::size_t>(rng.uniform_int(0, n - 1)); }

MetricsHistory history_of(const std::vector<std::vector<double>>& per_object) {
  MetricsHistory h;
  for (std::size_t o = 0; o < per_object.size(); ++o)
    for (std::size_t s = 0; s < per_object[o].size(); ++s)
      h.record(static_cast<int>(s), static_cast<int>(o), {per_object[o][s], 0.0, 0.0});
  return h;
}

}  // namespace

TEST_CASE("auroc examples") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const Bytes l{0, 0, 1, 1};
  CHECK(auroc(s, l) == doctest::Approx(0.75).epsilon(1e-15));
  const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
  CHECK(auroc(sep, l) == 1.0);
  const std::vector<double> flat(4, 0.3);
  CHECK(auroc(flat, l) == 0.5);
  const Bytes one_class{1, 1, 1, 1};
  CHECK_THROWS_AS(auroc(s, one_class), MetricError);
}

TEST_CASE("auroc matches pair counting on random tied scores") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + pick(rng, 60);
    std::vector<double> s(n);
    Bytes l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform(0.0, 1.0) * 8.0) / 8.0;
      l[i] = static_cast<std::uint8_t>(i < 1 ? 0 : i < 2 ? 1 : rng.bernoulli(0.4));
    }
    REQUIRE(std::abs(auroc(s, l) - oracle::pairwise_auroc(s, l)) < 1e-9);
  }
}

TEST_CASE("pixel auroc examples") {
  Rng rng(2);
  const std::size_t H = 8, W = 8;
  Bytes mask(H * W, 0);
  for (std::size_t i = 10; i < 30; ++i) mask[i] = 1;
  std::vector<double> perfect(mask.begin(), mask.end());
  const PixelSample one{perfect, mask, H, W};
  CHECK(pixel_auroc(std::span(&one, 1)) == 1.0);

  std::vector<double> scores(H * W);
  for (double& v : scores) v = rng.uniform(0.0, 1.0);
  const PixelSample single{scores, mask, H, W};
  CHECK(pixel_auroc(std::span(&single, 1)) == doctest::Approx(auroc(scores, mask)).epsilon(1e-15));

  const std::size_t big = 64;
  std::vector<std::vector<double>> maps(20, std::vector<double>(big * big));
  std::vector<Bytes> masks(20, Bytes(big * big));
  std::vector<PixelSample> images;
  for (std::size_t k = 0; k < 20; ++k) {
    for (auto& v : maps[k]) v = rng.uniform(0.0, 1.0);
    for (auto& m : masks[k]) m = static_cast<std::uint8_t>(rng.bernoulli(0.3));
    images.push_back({maps[k], masks[k], big, big});
  }
  CHECK(std::abs(pixel_auroc(images) - 0.5) < 0.02);
}

TEST_CASE("aupro examples") {
  const std::size_t H = 8, W = 8;
  Bytes mask(H * W, 0);
  for (std::size_t y = 2; y < 5; ++y)
    for (std::size_t x = 1; x < 4; ++x) mask[y * W + x] = 1;
  mask[7 * W + 7] = 1;
  std::vector<double> exact(mask.begin(), mask.end()), inverse(H * W);
  for (std::size_t i = 0; i < H * W; ++i) inverse[i] = 1.0 - exact[i];
  const PixelSample a{exact, mask, H, W}, b{inverse, mask, H, W};
  CHECK(aupro(std::span(&a, 1)) == doctest::Approx(1.0));
  CHECK(aupro(std::span(&b, 1)) == doctest::Approx(0.0));
  CHECK(aupro(std::span(&b, 1)) ==
        doctest::Approx(oracle::sweep_aupro({inverse}, {mask}, H, W)).epsilon(1e-9));
  const Bytes none(H * W, 0);
  const PixelSample c{exact, none, H, W};
  CHECK_THROWS_AS(aupro(std::span(&c, 1)), MetricError);
}

TEST_CASE("aupro matches the dense threshold sweep") {
  Rng rng(3);
  const std::size_t H = 16, W = 16;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> map(H * W);
    Bytes mask(H * W, 0);
    const std::size_t y0 = pick(rng, 10), x0 = pick(rng, 10);
    for (std::size_t y = y0; y < y0 + 4; ++y)
      for (std::size_t x = x0; x < x0 + 5; ++x) mask[y * W + x] = 1;
    mask[15 * W + pick(rng, 16)] = 1;
    for (std::size_t i = 0; i < H * W; ++i) map[i] = rng.uniform(0.0, 1.0) + 0.5 * mask[i];
    const PixelSample s{map, mask, H, W};
    REQUIRE(std::abs(aupro(std::span(&s, 1)) - oracle::sweep_aupro({map}, {mask}, H, W)) < 1e-3);
  }
}

TEST_CASE("regions use eight-connectivity") {
  const Bytes m{1, 0, 0,
                0, 1, 0,
                0, 0, 0,
                1, 1, 0};
  const auto [labels, count] = label_regions(m, 4, 3);
  CHECK(count == 2);
  CHECK(labels[0] == labels[4]);
  CHECK(labels[9] == labels[10]);
  CHECK(labels[0] != labels[9]);
  CHECK(labels[1] == -1);
}

TEST_CASE("forgetting examples") {
  CHECK(forgetting_metric(history_of({{90, 85, 80}}), MetricKind::kImageAuroc) == 10.0);
  CHECK(forgetting_metric(history_of({{70, 70, 70}, {60, 60, 60}}), MetricKind::kImageAuroc) == 0.0);
  CHECK(forgetting_metric(history_of({{90, 85, 80}, {70, 75, 80}}), MetricKind::kImageAuroc) == 2.5);
  CHECK_THROWS_AS(forgetting_metric(history_of({{90}}), MetricKind::kImageAuroc), MetricError);
}

TEST_CASE("forgetting matches direct evaluation on random histories") {
  Rng rng(4);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int t = 0; t < 100; ++t) {
    const std::size_t steps = 2 + pick(rng, 4), objects = 1 + pick(rng, 6);
    std::vector<std::vector<double>> acc(objects, std::vector<double>(steps, nan));
    MetricsHistory h;
    for (std::size_t o = 0; o < objects; ++o) {
      const std::size_t first = o == 0 ? 0 : pick(rng, static_cast<int>(steps));
      for (std::size_t s = first; s < steps; ++s) {
        acc[o][s] = rng.uniform(50.0, 100.0);
        h.record(static_cast<int>(s), static_cast<int>(o), {acc[o][s], acc[o][s], acc[o][s]});
      }
    }
    REQUIRE(std::abs(forgetting_metric(h, MetricKind::kImageAuroc) - oracle::direct_forgetting(acc)) < 1e-12);
  }
}

TEST_CASE("anomaly map examples") {
  Rng rng(5);
  const Tensor target = Tensor::randn({3, 4, 4}, rng, 1.0);
  const AnomalyScoreMap zero = anomaly_map(target, target, 16, 16);
  CHECK(zero.image_score == 0.0);
  for (double v : zero.map) CHECK(v == 0.0);

  Tensor rec = target.clone();
  rec.data()[1 * 16 + 2 * 4 + 1] += 3.0;  // channel 1, row 2, col 1
  const AnomalyScoreMap m = anomaly_map(target, rec, 16, 16, 1.0);
  std::size_t best = 0;
  for (std::size_t i = 1; i < m.map.size(); ++i)
    if (m.map[i] > m.map[best]) best = i;
  CHECK(best / 16 >= 8);
  CHECK(best / 16 < 12);
  CHECK(best % 16 >= 4);
  CHECK(best % 16 < 8);
  CHECK(m.image_score == doctest::Approx(m.map[best]));
}

TEST_CASE("residual map sums squared channel differences") {
  const Tensor a = Tensor::from({2, 1, 2}, {1.0, 2.0, 3.0, 4.0});
  const Tensor b = Tensor::from({2, 1, 2}, {0.0, 2.0, 1.0, 1.0});
  const auto r = residual_map(a, b);
  CHECK(r[0] == 5.0);
  CHECK(r[1] == 9.0);
}
