#include "ibiumad/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

namespace ibiumad::kernels {
namespace {

int initial_threads() {
  if (const char* env = std::getenv("IBIUMAD_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

int& threads_ref() {
  static int n = initial_threads();
  return n;
}

// Flat indices of one stride-2 sub-grid visited in the given direction.
void subgrid_order(std::size_t height, std::size_t width, std::size_t row_parity,
                   std::size_t col_parity, ScanDirection dir, std::vector<std::size_t>& out) {
  const std::size_t sh = height / 2;
  const std::size_t sw = width / 2;
  out.clear();
  out.reserve(sh * sw);
  auto cell = [&](std::size_t r, std::size_t c) {
    return (2 * r + row_parity) * width + (2 * c + col_parity);
  };
  switch (dir) {
    case ScanDirection::kRight:
      for (std::size_t r = 0; r < sh; ++r)
        for (std::size_t c = 0; c < sw; ++c) out.push_back(cell(r, c));
      break;
    case ScanDirection::kLeft:
      for (std::size_t r = sh; r-- > 0;)
        for (std::size_t c = sw; c-- > 0;) out.push_back(cell(r, c));
      break;
    case ScanDirection::kDown:
      for (std::size_t c = 0; c < sw; ++c)
        for (std::size_t r = 0; r < sh; ++r) out.push_back(cell(r, c));
      break;
    case ScanDirection::kUp:
      for (std::size_t c = sw; c-- > 0;)
        for (std::size_t r = sh; r-- > 0;) out.push_back(cell(r, c));
      break;
  }
}

// Forward scan of one channel along `order`, adding weight·y into out.
void scan_indexed(const double* x, double* out, const std::vector<std::size_t>& order, double a,
                  double b, double c, double d, double weight) {
  double h = 0.0;
  for (std::size_t idx : order) {
    h = a * h + b * x[idx];
    out[idx] += weight * (c * h + d * x[idx]);
  }
}

struct ChannelGrad {
  double a = 0, b = 0, c = 0, d = 0;
};

// Adjoint of scan_indexed; `hs` is scratch for the forward states.
void scan_indexed_backward(const double* x, const double* gout, double* gx,
                           const std::vector<std::size_t>& order, double a, double b, double c,
                           double d, double weight, std::vector<double>& hs, ChannelGrad& acc) {
  const std::size_t n = order.size();
  hs.resize(n);
  double h = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    h = a * h + b * x[order[t]];
    hs[t] = h;
  }
  double gh = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const std::size_t idx = order[t];
    const double gy = weight * gout[idx];
    gh = gh * a + c * gy;  // dL/dh_t
    const double h_prev = t > 0 ? hs[t - 1] : 0.0;
    acc.a += gh * h_prev;
    acc.b += gh * x[idx];
    acc.c += gy * hs[t];
    acc.d += gy * x[idx];
    gx[idx] += b * gh + d * gy;
  }
}

}  // namespace

int thread_count() { return threads_ref(); }
void set_thread_count(int n) { threads_ref() = std::max(1, n); }

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (m * k * n > 32768)
  for (long i = 0; i < rows; ++i) {
    double* crow = c.data() + i * n;
    std::fill(crow, crow + n, 0.0);
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_add_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (m * k * n > 32768)
  for (long i = 0; i < rows; ++i) {
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

void matmul_add_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(k);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (m * k * n > 32768)
  for (long p = 0; p < rows; ++p) {
    double* crow = c.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Convolution kernels iterate output rows with the valid x-range clipped up
// front so the innermost loop is a unit-stride axpy.

void conv2d_forward(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
                    std::span<double> out, const ConvGeometry& g) {
  const std::size_t H = g.height, W = g.width, HW = H * W;
  const std::size_t cin_g = g.in_channels / g.groups;
  const std::size_t cout_g = g.out_channels / g.groups;
  const long ph = static_cast<long>(g.kernel_h / 2), pw = static_cast<long>(g.kernel_w / 2);
  const long outs = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (g.out_channels * HW * cin_g > 16384)
  for (long oc = 0; oc < outs; ++oc) {
    double* o = out.data() + oc * HW;
    std::fill(o, o + HW, bias.empty() ? 0.0 : bias[oc]);
    const std::size_t group = oc / cout_g;
    for (std::size_t icg = 0; icg < cin_g; ++icg) {
      const std::size_t ic = group * cin_g + icg;
      const double* xin = x.data() + ic * HW;
      const double* wk = w.data() + ((oc * cin_g + icg) * g.kernel_h) * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const long dy = static_cast<long>(ky) - ph;
        const long y0 = std::max(0L, -dy), y1 = std::min(static_cast<long>(H), static_cast<long>(H) - dy);
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const double wv = wk[ky * g.kernel_w + kx];
          if (wv == 0.0) continue;
          const long dx = static_cast<long>(kx) - pw;
          const long x0 = std::max(0L, -dx), x1 = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
          for (long yy = y0; yy < y1; ++yy) {
            double* orow = o + yy * W;
            const double* irow = xin + (yy + dy) * static_cast<long>(W) + dx;
            for (long xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(std::span<const double> gout, std::span<const double> w,
                           std::span<double> gx, const ConvGeometry& g) {
  const std::size_t H = g.height, W = g.width, HW = H * W;
  const std::size_t cin_g = g.in_channels / g.groups;
  const std::size_t cout_g = g.out_channels / g.groups;
  const long ph = static_cast<long>(g.kernel_h / 2), pw = static_cast<long>(g.kernel_w / 2);
  const long ins = static_cast<long>(g.in_channels);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (g.in_channels * HW * cout_g > 16384)
  for (long ic = 0; ic < ins; ++ic) {
    double* gi = gx.data() + ic * HW;
    const std::size_t group = ic / cin_g;
    const std::size_t icg = ic % cin_g;
    for (std::size_t ocg = 0; ocg < cout_g; ++ocg) {
      const std::size_t oc = group * cout_g + ocg;
      const double* go = gout.data() + oc * HW;
      const double* wk = w.data() + ((oc * cin_g + icg) * g.kernel_h) * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const long dy = static_cast<long>(ky) - ph;
        const long y0 = std::max(0L, -dy), y1 = std::min(static_cast<long>(H), static_cast<long>(H) - dy);
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const double wv = wk[ky * g.kernel_w + kx];
          if (wv == 0.0) continue;
          const long dx = static_cast<long>(kx) - pw;
          const long x0 = std::max(0L, -dx), x1 = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
          // out[y][x] used in[y+dy][x+dx]
          for (long yy = y0; yy < y1; ++yy) {
            const double* grow = go + yy * W;
            double* irow = gi + (yy + dy) * static_cast<long>(W) + dx;
            for (long xx = x0; xx < x1; ++xx) irow[xx] += wv * grow[xx];
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(std::span<const double> gout, std::span<const double> x,
                            std::span<double> gw, const ConvGeometry& g) {
  const std::size_t H = g.height, W = g.width, HW = H * W;
  const std::size_t cin_g = g.in_channels / g.groups;
  const std::size_t cout_g = g.out_channels / g.groups;
  const long ph = static_cast<long>(g.kernel_h / 2), pw = static_cast<long>(g.kernel_w / 2);
  const long outs = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (g.out_channels * HW * cin_g > 16384)
  for (long oc = 0; oc < outs; ++oc) {
    const double* go = gout.data() + oc * HW;
    const std::size_t group = oc / cout_g;
    for (std::size_t icg = 0; icg < cin_g; ++icg) {
      const double* xin = x.data() + (group * cin_g + icg) * HW;
      double* gk = gw.data() + ((oc * cin_g + icg) * g.kernel_h) * g.kernel_w;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const long dy = static_cast<long>(ky) - ph;
        const long y0 = std::max(0L, -dy), y1 = std::min(static_cast<long>(H), static_cast<long>(H) - dy);
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const long dx = static_cast<long>(kx) - pw;
          const long x0 = std::max(0L, -dx), x1 = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
          double s = 0.0;
          for (long yy = y0; yy < y1; ++yy) {
            const double* grow = go + yy * W;
            const double* irow = xin + (yy + dy) * static_cast<long>(W) + dx;
            for (long xx = x0; xx < x1; ++xx) s += grow[xx] * irow[xx];
          }
          gk[ky * g.kernel_w + kx] += s;
        }
      }
    }
  }
}

void ssm_scan_forward(std::span<const double> x, const ScanParams& p, std::span<double> y,
                      std::size_t steps, std::size_t channels) {
  for (std::size_t ch = 0; ch < channels; ++ch) {
    double h = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t i = t * channels + ch;
      h = p.a[ch] * h + p.b[ch] * x[i];
      y[i] = p.c[ch] * h + p.d[ch] * x[i];
    }
  }
}

void ssm_scan_backward(std::span<const double> x, const ScanParams& p, std::span<const double> gy,
                       std::span<double> gx, const ScanGrads& gp, std::size_t steps,
                       std::size_t channels) {
  std::vector<double> hs(steps);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const double a = p.a[ch], b = p.b[ch], c = p.c[ch], d = p.d[ch];
    double h = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      h = a * h + b * x[t * channels + ch];
      hs[t] = h;
    }
    double gh = 0.0;
    for (std::size_t t = steps; t-- > 0;) {
      const std::size_t i = t * channels + ch;
      gh = gh * a + c * gy[i];
      if (!gp.a.empty()) gp.a[ch] += gh * (t > 0 ? hs[t - 1] : 0.0);
      if (!gp.b.empty()) gp.b[ch] += gh * x[i];
      if (!gp.c.empty()) gp.c[ch] += gy[i] * hs[t];
      if (!gp.d.empty()) gp.d[ch] += gy[i] * x[i];
      if (!gx.empty()) gx[i] += b * gh + d * gy[i];
    }
  }
}

void es2d_direction_forward(std::span<const double> x, const ScanParams& p, std::span<double> y,
                            std::size_t channels, std::size_t height, std::size_t width,
                            ScanDirection dir) {
  const std::size_t HW = height * width;
  std::fill(y.begin(), y.end(), 0.0);
  std::vector<std::size_t> order;
  for (std::size_t rp = 0; rp < 2; ++rp)
    for (std::size_t cp = 0; cp < 2; ++cp) {
      subgrid_order(height, width, rp, cp, dir, order);
      for (std::size_t ch = 0; ch < channels; ++ch)
        scan_indexed(x.data() + ch * HW, y.data() + ch * HW, order, p.a[ch], p.b[ch], p.c[ch],
                     p.d[ch], 1.0);
    }
}

void es2d_forward(std::span<const double> x, const ScanParams& p, std::span<double> y,
                  std::size_t channels, std::size_t height, std::size_t width) {
  const std::size_t HW = height * width;
  // Orders depend only on geometry; build all 16 once.
  std::vector<std::vector<std::size_t>> orders;
  for (std::size_t rp = 0; rp < 2; ++rp)
    for (std::size_t cp = 0; cp < 2; ++cp)
      for (ScanDirection dir : kAllDirections) {
        orders.emplace_back();
        subgrid_order(height, width, rp, cp, dir, orders.back());
      }
  const long chans = static_cast<long>(channels);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (channels * HW > 8192)
  for (long ch = 0; ch < chans; ++ch) {
    double* out = y.data() + ch * HW;
    std::fill(out, out + HW, 0.0);
    for (const auto& order : orders)
      scan_indexed(x.data() + ch * HW, out, order, p.a[ch], p.b[ch], p.c[ch], p.d[ch], 0.25);
  }
}

void es2d_backward(std::span<const double> x, const ScanParams& p, std::span<const double> gy,
                   std::span<double> gx, const ScanGrads& gp, std::size_t channels,
                   std::size_t height, std::size_t width) {
  const std::size_t HW = height * width;
  std::vector<std::vector<std::size_t>> orders;
  for (std::size_t rp = 0; rp < 2; ++rp)
    for (std::size_t cp = 0; cp < 2; ++cp)
      for (ScanDirection dir : kAllDirections) {
        orders.emplace_back();
        subgrid_order(height, width, rp, cp, dir, orders.back());
      }
  const long chans = static_cast<long>(channels);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (channels * HW > 8192)
  for (long ch = 0; ch < chans; ++ch) {
    std::vector<double> hs;
    std::vector<double> sink;
    double* gxc = nullptr;
    if (!gx.empty()) {
      gxc = gx.data() + ch * HW;
    } else {
      sink.assign(HW, 0.0);
      gxc = sink.data();
    }
    ChannelGrad acc;
    for (const auto& order : orders)
      scan_indexed_backward(x.data() + ch * HW, gy.data() + ch * HW, gxc, order, p.a[ch], p.b[ch],
                            p.c[ch], p.d[ch], 0.25, hs, acc);
    if (!gp.a.empty()) gp.a[ch] += acc.a;
    if (!gp.b.empty()) gp.b[ch] += acc.b;
    if (!gp.c.empty()) gp.c[ch] += acc.c;
    if (!gp.d.empty()) gp.d[ch] += acc.d;
  }
}

namespace reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
}

void conv2d_forward(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
                    std::span<double> out, const ConvGeometry& g) {
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  const std::size_t cin_g = g.in_channels / g.groups, cout_g = g.out_channels / g.groups;
  const long ph = static_cast<long>(g.kernel_h / 2), pw = static_cast<long>(g.kernel_w / 2);
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    const std::size_t group = oc / cout_g;
    for (long y = 0; y < H; ++y)
      for (long xx = 0; xx < W; ++xx) {
        double s = bias.empty() ? 0.0 : bias[oc];
        for (std::size_t icg = 0; icg < cin_g; ++icg)
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const long iy = y + static_cast<long>(ky) - ph, ix = xx + static_cast<long>(kx) - pw;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              const std::size_t ic = group * cin_g + icg;
              s += w[((oc * cin_g + icg) * g.kernel_h + ky) * g.kernel_w + kx] *
                   x[(ic * g.height + iy) * g.width + ix];
            }
        out[(oc * g.height + y) * g.width + xx] = s;
      }
  }
}

void conv2d_backward_input(std::span<const double> gout, std::span<const double> w,
                           std::span<double> gx, const ConvGeometry& g) {
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  const std::size_t cin_g = g.in_channels / g.groups, cout_g = g.out_channels / g.groups;
  const long ph = static_cast<long>(g.kernel_h / 2), pw = static_cast<long>(g.kernel_w / 2);
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    const std::size_t group = oc / cout_g;
    for (long y = 0; y < H; ++y)
      for (long xx = 0; xx < W; ++xx) {
        const double go = gout[(oc * g.height + y) * g.width + xx];
        for (std::size_t icg = 0; icg < cin_g; ++icg)
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const long iy = y + static_cast<long>(ky) - ph, ix = xx + static_cast<long>(kx) - pw;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              const std::size_t ic = group * cin_g + icg;
              gx[(ic * g.height + iy) * g.width + ix] +=
                  go * w[((oc * cin_g + icg) * g.kernel_h + ky) * g.kernel_w + kx];
            }
      }
  }
}

void conv2d_backward_weight(std::span<const double> gout, std::span<const double> x,
                            std::span<double> gw, const ConvGeometry& g) {
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  const std::size_t cin_g = g.in_channels / g.groups, cout_g = g.out_channels / g.groups;
  const long ph = static_cast<long>(g.kernel_h / 2), pw = static_cast<long>(g.kernel_w / 2);
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    const std::size_t group = oc / cout_g;
    for (long y = 0; y < H; ++y)
      for (long xx = 0; xx < W; ++xx) {
        const double go = gout[(oc * g.height + y) * g.width + xx];
        for (std::size_t icg = 0; icg < cin_g; ++icg)
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const long iy = y + static_cast<long>(ky) - ph, ix = xx + static_cast<long>(kx) - pw;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              const std::size_t ic = group * cin_g + icg;
              gw[((oc * cin_g + icg) * g.kernel_h + ky) * g.kernel_w + kx] +=
                  go * x[(ic * g.height + iy) * g.width + ix];
            }
      }
  }
}

// Literal four-loop form: for each parity pair, each direction, walk the
// sub-grid with explicit nested loops.
void es2d_forward(std::span<const double> x, const ScanParams& p, std::span<double> y,
                  std::size_t channels, std::size_t height, std::size_t width) {
  const std::size_t sh = height / 2, sw = width / 2;
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const double a = p.a[ch], b = p.b[ch], c = p.c[ch], d = p.d[ch];
    auto at = [&](std::size_t rp, std::size_t cp, std::size_t r, std::size_t cc) {
      return (ch * height + 2 * r + rp) * width + 2 * cc + cp;
    };
    for (std::size_t rp = 0; rp < 2; ++rp)
      for (std::size_t cp = 0; cp < 2; ++cp) {
        double h = 0.0;
        for (std::size_t r = 0; r < sh; ++r)
          for (std::size_t cc = 0; cc < sw; ++cc) {
            const std::size_t i = at(rp, cp, r, cc);
            h = a * h + b * x[i];
            y[i] += 0.25 * (c * h + d * x[i]);
          }
        h = 0.0;
        for (std::size_t r = sh; r-- > 0;)
          for (std::size_t cc = sw; cc-- > 0;) {
            const std::size_t i = at(rp, cp, r, cc);
            h = a * h + b * x[i];
            y[i] += 0.25 * (c * h + d * x[i]);
          }
        h = 0.0;
        for (std::size_t cc = 0; cc < sw; ++cc)
          for (std::size_t r = 0; r < sh; ++r) {
            const std::size_t i = at(rp, cp, r, cc);
            h = a * h + b * x[i];
            y[i] += 0.25 * (c * h + d * x[i]);
          }
        h = 0.0;
        for (std::size_t cc = sw; cc-- > 0;)
          for (std::size_t r = sh; r-- > 0;) {
            const std::size_t i = at(rp, cp, r, cc);
            h = a * h + b * x[i];
            y[i] += 0.25 * (c * h + d * x[i]);
          }
      }
  }
}

}  // namespace reference
}  // namespace ibiumad::kernels
