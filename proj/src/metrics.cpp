#include "ibiumad/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ibiumad/errors.hpp"

namespace ibiumad {

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) {
        rank_sum += avg_rank;
        pos += 1;
      }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw MetricError("auroc: needs both positive and negative samples");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double pixel_auroc(std::span<const PixelSample> images) {
  std::vector<double> s;
  std::vector<std::uint8_t> l;
  for (const auto& im : images) {
    if (im.scores.size() != im.mask.size()) throw DimensionError("pixel_auroc: map/mask size mismatch");
    s.insert(s.end(), im.scores.begin(), im.scores.end());
    for (auto v : im.mask) l.push_back(v ? 1 : 0);
  }
  return auroc(s, l);
}

std::pair<std::vector<int>, int> label_regions(std::span<const std::uint8_t> mask, std::size_t height,
                                               std::size_t width) {
  if (mask.size() != height * width) throw DimensionError("label_regions: mask size mismatch");
  // Union-find over foreground pixels.
  std::vector<int> parent(mask.size(), -1);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  const long H = static_cast<long>(height), W = static_cast<long>(width);
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      const int i = static_cast<int>(y * W + x);
      if (!mask[i]) continue;
      parent[i] = i;
      for (const auto [dy, dx] : {std::pair{-1L, -1L}, {-1L, 0L}, {-1L, 1L}, {0L, -1L}}) {
        const long ny = y + dy, nx = x + dx;
        if (ny < 0 || nx < 0 || nx >= W) continue;
        const int j = static_cast<int>(ny * W + nx);
        if (mask[j]) unite(i, j);
      }
    }
  std::vector<int> labels(mask.size(), -1);
  std::vector<int> root_label(mask.size(), -1);
  int count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const int r = find(static_cast<int>(i));
    if (root_label[r] < 0) root_label[r] = count++;
    labels[i] = root_label[r];
  }
  return {labels, count};
}

double aupro(std::span<const PixelSample> images, double fpr_limit) {
  if (!(fpr_limit > 0.0 && fpr_limit <= 1.0)) throw ParameterError("aupro: fpr_limit must be in (0,1]");
  struct Px {
    double score;
    int region;  // -1 normal
  };
  std::vector<Px> px;
  std::vector<double> region_size;
  for (const auto& im : images) {
    if (im.scores.size() != im.mask.size() || im.mask.size() != im.height * im.width)
      throw DimensionError("aupro: map/mask size mismatch");
    auto [labels, n] = label_regions(im.mask, im.height, im.width);
    const int base = static_cast<int>(region_size.size());
    region_size.resize(region_size.size() + n, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int r = labels[i] < 0 ? -1 : base + labels[i];
      if (r >= 0) region_size[r] += 1.0;
      px.push_back({im.scores[i], r});
    }
  }
  if (region_size.empty()) throw MetricError("aupro: no anomalous pixels");
  const double normals =
      static_cast<double>(std::count_if(px.begin(), px.end(), [](const Px& p) { return p.region < 0; }));
  if (normals == 0) throw MetricError("aupro: no normal pixels");
  const double regions = static_cast<double>(region_size.size());

  std::sort(px.begin(), px.end(), [](const Px& a, const Px& b) { return a.score > b.score; });
  double fp = 0.0, overlap_sum = 0.0;
  double prev_fpr = 0.0, prev_pro = 0.0, area = 0.0;
  for (std::size_t i = 0; i < px.size();) {
    std::size_t j = i;
    while (j < px.size() && px[j].score == px[i].score) {
      if (px[j].region < 0) fp += 1.0;
      else overlap_sum += 1.0 / region_size[px[j].region];
      ++j;
    }
    i = j;
    const double fpr = fp / normals, pro = overlap_sum / regions;
    if (fpr >= fpr_limit) {
      const double t = fpr > prev_fpr ? (fpr_limit - prev_fpr) / (fpr - prev_fpr) : 0.0;
      const double pro_at_limit = prev_pro + t * (pro - prev_pro);
      area += (fpr_limit - prev_fpr) * (prev_pro + pro_at_limit) / 2.0;
      prev_fpr = fpr_limit;
      break;
    }
    area += (fpr - prev_fpr) * (prev_pro + pro) / 2.0;
    prev_fpr = fpr;
    prev_pro = pro;
  }
  return area / fpr_limit;
}

const char* metric_kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::kImageAuroc: return "iauroc";
    case MetricKind::kPixelAuroc: return "pauroc";
    case MetricKind::kAupro: return "aupro";
  }
  return "?";
}

double MetricRecord::get(MetricKind k) const {
  switch (k) {
    case MetricKind::kImageAuroc: return iauroc;
    case MetricKind::kPixelAuroc: return pauroc;
    case MetricKind::kAupro: return aupro;
  }
  return 0.0;
}

void MetricsHistory::record(int step, int object, const MetricRecord& r) { records_[{step, object}] = r; }

bool MetricsHistory::has(int step, int object) const { return records_.count({step, object}) > 0; }

const MetricRecord& MetricsHistory::at(int step, int object) const {
  auto it = records_.find({step, object});
  if (it == records_.end())
    throw std::out_of_range("no record for step " + std::to_string(step) + ", object " + std::to_string(object));
  return it->second;
}

std::vector<int> MetricsHistory::steps() const {
  std::vector<int> out;
  for (const auto& [key, _] : records_)
    if (out.empty() || out.back() != key.first) out.push_back(key.first);
  return out;
}

std::vector<int> MetricsHistory::objects_at(int step) const {
  std::vector<int> out;
  for (auto it = records_.lower_bound({step, std::numeric_limits<int>::min()});
       it != records_.end() && it->first.first == step; ++it)
    out.push_back(it->first.second);
  return out;
}

int MetricsHistory::first_step(int object) const {
  for (const auto& [key, _] : records_)
    if (key.second == object) return key.first;
  return -1;
}

double forgetting_metric(const MetricsHistory& history, MetricKind kind) {
  const std::vector<int> steps = history.steps();
  if (steps.size() < 2) throw MetricError("forgetting metric needs at least two evaluated steps");
  const int final_step = steps.back();
  double total = 0.0;
  int count = 0;
  for (int object : history.objects_at(final_step)) {
    const int first = history.first_step(object);
    if (first >= final_step) continue;
    const double last = history.at(final_step, object).get(kind);
    double worst = -std::numeric_limits<double>::infinity();
    for (int s : steps) {
      if (s >= final_step) break;
      if (history.has(s, object)) worst = std::max(worst, history.at(s, object).get(kind) - last);
    }
    total += worst;
    ++count;
  }
  if (count == 0) throw MetricError("forgetting metric: no object was evaluated before the final step");
  return total / count;
}

}  // namespace ibiumad
