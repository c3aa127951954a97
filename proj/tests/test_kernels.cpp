#include <doctest.h>

#include <cmath>
#include <vector>

#include "ibiumad/kernels.hpp"
#include "ibiumad/oracles.hpp"
#include "ibiumad/rng.hpp"
#include "ibiumad/tensor.hpp"

using namespace ibiumad;
namespace k = ibiumad::kernels;

namespace {

std::vector<double> randv(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

// Literal ES2D: every parity sub-grid, four hand-written loop nests, mean.
std::vector<double> es2d_literal(const std::vector<double>& x, std::size_t C, std::size_t H, std::size_t W,
                                 const std::vector<double>& a, const std::vector<double>& b,
                                 const std::vector<double>& c, const std::vector<double>& d) {
  std::vector<double> y(x.size(), 0.0);
  const std::size_t sh = H / 2, sw = W / 2;
  for (std::size_t ch = 0; ch < C; ++ch) {
    auto at = [&](std::size_t r, std::size_t col) { return ch * H * W + r * W + col; };
    for (std::size_t pr = 0; pr < 2; ++pr)
      for (std::size_t pc = 0; pc < 2; ++pc) {
        auto visit = [&](double& h, std::size_t r, std::size_t col) {
          const std::size_t i = at(2 * r + pr, 2 * col + pc);
          h = a[ch] * h + b[ch] * x[i];
          y[i] += 0.25 * (c[ch] * h + d[ch] * x[i]);
        };
        double h = 0;
        for (std::size_t r = 0; r < sh; ++r)
          for (std::size_t col = 0; col < sw; ++col) visit(h, r, col);
        h = 0;
        for (std::size_t r = sh; r-- > 0;)
          for (std::size_t col = sw; col-- > 0;) visit(h, r, col);
        h = 0;
        for (std::size_t col = 0; col < sw; ++col)
          for (std::size_t r = 0; r < sh; ++r) visit(h, r, col);
        h = 0;
        for (std::size_t col = sw; col-- > 0;)
          for (std::size_t r = sh; r-- > 0;) visit(h, r, col);
      }
  }
  return y;
}

}  // namespace

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  Rng rng(1);
  k::set_thread_count(4);
  for (int t = 0; t < 5; ++t) {
    const std::size_t m = 40 + t * 7, kk = 50, n = 60;
    const auto a = randv(rng, m * kk), b = randv(rng, kk * n);
    std::vector<double> c1(m * n), c2(m * n);
    k::matmul(a, b, c1, m, kk, n);
    k::reference::matmul(a, b, c2, m, kk, n);
    CHECK(c1 == c2);
  }
  const k::ConvGeometry g{8, 12, 20, 20, 3, 3, 2};
  const auto x = randv(rng, 8 * 400), w = randv(rng, 12 * 4 * 9), bias = randv(rng, 12);
  std::vector<double> o1(12 * 400), o2(12 * 400);
  k::conv2d_forward(x, w, bias, o1, g);
  k::reference::conv2d_forward(x, w, bias, o2, g);
  CHECK(o1 == o2);
  const auto gout = randv(rng, 12 * 400);
  std::vector<double> gx1(8 * 400, 0.0), gx2(8 * 400, 0.0), gw1(w.size(), 0.0), gw2(w.size(), 0.0);
  k::conv2d_backward_input(gout, w, gx1, g);
  k::reference::conv2d_backward_input(gout, w, gx2, g);
  // The reference visits kernel taps in the opposite order, so only rounding differs.
  for (std::size_t i = 0; i < gx1.size(); ++i) REQUIRE(std::abs(gx1[i] - gx2[i]) <= 1e-12 * (1.0 + std::abs(gx2[i])));
  std::vector<double> gx3(gx1.size(), 0.0);
  k::set_thread_count(1);
  k::conv2d_backward_input(gout, w, gx3, g);
  k::set_thread_count(4);
  CHECK(gx1 == gx3);
  k::conv2d_backward_weight(gout, x, gw1, g);
  k::reference::conv2d_backward_weight(gout, x, gw2, g);
  CHECK(gw1 == gw2);

  const std::size_t C = 16, H = 24, W = 24;
  const auto xs = randv(rng, C * H * W);
  std::vector<double> pa(C), pb = randv(rng, C), pc = randv(rng, C), pd = randv(rng, C);
  for (double& v : pa) v = rng.uniform(0.0, 0.99);
  std::vector<double> y1(xs.size()), y2(xs.size());
  k::es2d_forward(xs, {pa, pb, pc, pd}, y1, C, H, W);
  k::reference::es2d_forward(xs, {pa, pb, pc, pd}, y2, C, H, W);
  CHECK(y1 == y2);
  k::set_thread_count(1);
}

TEST_CASE("ssm_scan examples") {
  const Tensor x = Tensor::from({3, 1}, {1, 0, 0});
  const Tensor one = Tensor::full({1}, 1.0), zero = Tensor::zeros({1});
  const Tensor y = ssm_scan(x, Tensor::full({1}, 0.5), one, one, zero);
  CHECK(y.at(0) == 1.0);
  CHECK(y.at(1) == 0.5);
  CHECK(y.at(2) == 0.25);
  const Tensor silent = ssm_scan(Tensor::zeros({4, 2}), Tensor::full({2}, 0.3), Tensor::full({2}, 2.0),
                                 Tensor::full({2}, 1.5), Tensor::full({2}, 0.7));
  for (double v : silent.data()) CHECK(v == 0.0);
  // Zero decay: memoryless.
  Rng rng(2);
  const Tensor xs = Tensor::randn({6, 1}, rng, 1.0);
  const Tensor m = ssm_scan(xs, zero, Tensor::full({1}, 2.0), Tensor::full({1}, 3.0), Tensor::full({1}, 0.5));
  for (std::size_t t = 0; t < 6; ++t) CHECK(m.at(t) == doctest::Approx((6.0 + 0.5) * xs.at(t)));
}

TEST_CASE("ssm_scan agrees with the unrolled closed form") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t T = rng.uniform_int(1, 12);
    const Tensor x = Tensor::randn({T, 1}, rng, 1.0);
    const double a = rng.uniform(0.0, 0.95), b = rng.normal(0, 1), c = rng.normal(0, 1), d = rng.normal(0, 1);
    const Tensor y = ssm_scan(x, Tensor::full({1}, a), Tensor::full({1}, b), Tensor::full({1}, c), Tensor::full({1}, d));
    const auto want = oracle::scan_closed_form({x.data().begin(), x.data().end()}, a, b, c, d);
    for (std::size_t i = 0; i < T; ++i) CHECK(y.at(i) == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("es2d matches a literal four-loop implementation") {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const std::size_t C = 3, H = 4, W = 4;
    const auto x = randv(rng, C * H * W);
    std::vector<double> a(C), b = randv(rng, C), c = randv(rng, C), d = randv(rng, C);
    for (double& v : a) v = rng.uniform(0.0, 0.99);
    const Tensor y = es2d(Tensor::from({C, H, W}, x), Tensor::from({C}, a), Tensor::from({C}, b), Tensor::from({C}, c),
                          Tensor::from({C}, d));
    const auto want = es2d_literal(x, C, H, W, a, b, c, d);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(y.at(i) - want[i]) < 1e-12);
  }
}

TEST_CASE("es2d zero input and per-direction causality") {
  const Tensor p = Tensor::full({1}, 0.6), q = Tensor::full({1}, 1.0), z = Tensor::zeros({1});
  const Tensor silent = es2d(Tensor::zeros({1, 6, 6}), p, q, q, z);
  for (double v : silent.data()) CHECK(v == 0.0);

  // One impulse at sub-grid cell (1,1) of the even/even grid of an 8×8 map.
  const std::size_t H = 8, W = 8;
  std::vector<double> x(H * W, 0.0);
  x[2 * W + 2] = 1.0;
  const std::vector<double> a{0.6}, b{1.0}, c{1.0}, d{0.0};
  std::vector<double> y(H * W);
  k::es2d_direction_forward(x, {a, b, c, d}, y, 1, H, W, k::ScanDirection::kRight);
  // Row-major scan: every sub-grid cell before (1,1) stays zero.
  CHECK(y[0 * W + 0] == 0.0);
  CHECK(y[0 * W + 2] == 0.0);
  CHECK(y[0 * W + 6] == 0.0);
  CHECK(y[2 * W + 0] == 0.0);
  CHECK(y[2 * W + 2] == 1.0);
  CHECK(y[2 * W + 4] == doctest::Approx(0.6));
  k::es2d_direction_forward(x, {a, b, c, d}, y, 1, H, W, k::ScanDirection::kLeft);
  CHECK(y[2 * W + 4] == 0.0);
  CHECK(y[2 * W + 0] == doctest::Approx(0.6));
  k::es2d_direction_forward(x, {a, b, c, d}, y, 1, H, W, k::ScanDirection::kDown);
  CHECK(y[0 * W + 2] == 0.0);
  CHECK(y[4 * W + 2] == doctest::Approx(0.6));
  k::es2d_direction_forward(x, {a, b, c, d}, y, 1, H, W, k::ScanDirection::kUp);
  CHECK(y[4 * W + 2] == 0.0);
  CHECK(y[0 * W + 2] == doctest::Approx(0.6));
  // Other parity grids never see the impulse.
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t col = 0; col < W; ++col)
      if (r % 2 || col % 2) CHECK(y[r * W + col] == 0.0);
}
