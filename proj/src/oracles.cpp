#include "ibiumad/oracles.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <stdexcept>

namespace ibiumad::oracle {

double pairwise_auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) throw std::domain_error("pairwise_auroc: one class only");
  return wins / pairs;
}

namespace {

std::vector<int> flood_fill(const std::vector<std::uint8_t>& mask, std::size_t h, std::size_t w, int& count) {
  std::vector<int> label(mask.size(), -1);
  count = 0;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || label[start] >= 0) continue;
    std::deque<std::size_t> queue{start};
    label[start] = count;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      const long y = static_cast<long>(p / w), x = static_cast<long>(p % w);
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= static_cast<long>(h) || nx >= static_cast<long>(w)) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
          if (mask[q] && label[q] < 0) {
            label[q] = count;
            queue.push_back(q);
          }
        }
    }
    ++count;
  }
  return label;
}

}  // namespace

double sweep_aupro(const std::vector<std::vector<double>>& maps, const std::vector<std::vector<std::uint8_t>>& masks,
                   std::size_t height, std::size_t width, double fpr_limit) {
  struct Region {
    std::size_t image;
    std::vector<std::size_t> pixels;
  };
  std::vector<Region> regions;
  std::set<double> thresholds;
  double normals = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    int count = 0;
    const auto label = flood_fill(masks[i], height, width, count);
    const std::size_t base = regions.size();
    for (int r = 0; r < count; ++r) regions.push_back({i, {}});
    for (std::size_t p = 0; p < label.size(); ++p) {
      if (label[p] >= 0) regions[base + label[p]].pixels.push_back(p);
      else normals += 1;
      thresholds.insert(maps[i][p]);
    }
  }
  if (regions.empty() || normals == 0) throw std::domain_error("sweep_aupro: degenerate instance");

  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    const double t = *it;
    double fp = 0;
    for (std::size_t i = 0; i < maps.size(); ++i)
      for (std::size_t p = 0; p < maps[i].size(); ++p)
        if (!masks[i][p] && maps[i][p] >= t) fp += 1;
    double pro = 0;
    for (const auto& r : regions) {
      double hit = 0;
      for (std::size_t p : r.pixels)
        if (maps[r.image][p] >= t) hit += 1;
      pro += hit / static_cast<double>(r.pixels.size());
    }
    curve.emplace_back(fp / normals, pro / static_cast<double>(regions.size()));
  }
  double area = 0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const auto [f0, p0] = curve[k - 1];
    const auto [f1, p1] = curve[k];
    if (f0 >= fpr_limit) break;
    if (f1 <= fpr_limit) {
      area += (f1 - f0) * (p0 + p1) / 2;
    } else {
      const double p_lim = p0 + (p1 - p0) * (fpr_limit - f0) / (f1 - f0);
      area += (fpr_limit - f0) * (p0 + p_lim) / 2;
    }
  }
  return area / fpr_limit;
}

double direct_forgetting(const std::vector<std::vector<double>>& acc) {
  if (acc.empty() || acc[0].size() < 2) throw std::domain_error("direct_forgetting: need two steps");
  const std::size_t last = acc[0].size() - 1;
  double total = 0;
  int n = 0;
  for (const auto& row : acc) {
    bool earlier = false;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < last; ++s)
      if (!std::isnan(row[s])) {
        earlier = true;
        best = std::max(best, row[s] - row[last]);
      }
    if (earlier) {
      total += best;
      ++n;
    }
  }
  if (n == 0) throw std::domain_error("direct_forgetting: no object before the last step");
  return total / n;
}

namespace {

double h(const std::vector<double>& p) {
  double out = 0;
  for (double v : p)
    if (v > 0) out -= v * std::log(v);
  return out;
}

}  // namespace

double mi_from_entropies(const std::vector<double>& p_ab, std::size_t na, std::size_t nb) {
  std::vector<double> pa(na, 0), pb(nb, 0);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b) {
      pa[a] += p_ab[a * nb + b];
      pb[b] += p_ab[a * nb + b];
    }
  return h(pa) + h(pb) - h(p_ab);
}

double cmi_from_entropies(const std::vector<double>& p, std::size_t nf, std::size_t ng, std::size_t ny) {
  std::vector<double> fy(nf * ny, 0), gy(ng * ny, 0), y(ny, 0);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t g = 0; g < ng; ++g)
      for (std::size_t k = 0; k < ny; ++k) {
        const double v = p[(f * ng + g) * ny + k];
        fy[f * ny + k] += v;
        gy[g * ny + k] += v;
        y[k] += v;
      }
  return h(fy) + h(gy) - h(p) - h(y);
}

std::vector<double> scan_closed_form(const std::vector<double>& x, double a, double b, double c, double d) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0;
    for (std::size_t s = 0; s <= t; ++s) acc += std::pow(a, static_cast<double>(t - s)) * b * x[s];
    y[t] = c * acc + d * x[t];
  }
  return y;
}

std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                 std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t l = 0; l < k; ++l) c[i * n + j] += a[i * k + l] * b[l * n + j];
  return c;
}

}  // namespace ibiumad::oracle
