#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace ibiumad {

/// Probability that a random positive outranks a random negative, ties ½.
/// Throws MetricError unless both classes are present.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// One image's pixel scores and binary ground truth, both H×W row-major.
struct PixelSample {
  std::span<const double> scores;
  std::span<const std::uint8_t> mask;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// AUROC over the flattened pixels of every image.
double pixel_auroc(std::span<const PixelSample> images);

/// Connected components of a binary mask (8-connectivity). Returns a label
/// per pixel (-1 for background) and the number of components.
std::pair<std::vector<int>, int> label_regions(std::span<const std::uint8_t> mask, std::size_t height,
                                               std::size_t width);

/// Area under the per-region-overlap vs FPR curve up to `fpr_limit`,
/// trapezoidal over every distinct threshold, divided by `fpr_limit`.
/// Throws MetricError when there are no anomalous or no normal pixels.
double aupro(std::span<const PixelSample> images, double fpr_limit = 0.3);

enum class MetricKind { kImageAuroc, kPixelAuroc, kAupro };
const char* metric_kind_name(MetricKind k);

struct MetricRecord {
  double iauroc = 0.0;
  double pauroc = 0.0;
  double aupro = 0.0;

  double get(MetricKind k) const;
};

/// Per-step, per-object evaluation records.
class MetricsHistory {
 public:
  void record(int step, int object, const MetricRecord& r);
  bool has(int step, int object) const;
  const MetricRecord& at(int step, int object) const;

  std::vector<int> steps() const;
  std::vector<int> objects_at(int step) const;
  /// Step at which the object was first evaluated, or -1.
  int first_step(int object) const;
  std::size_t size() const { return records_.size(); }
  const std::map<std::pair<int, int>, MetricRecord>& records() const { return records_; }

 private:
  std::map<std::pair<int, int>, MetricRecord> records_;
};

/// Average over objects first evaluated before the final step of the largest
/// drop max_s (I_s - I_final). Result is in the units the history stores.
/// Throws MetricError with fewer than two steps.
double forgetting_metric(const MetricsHistory& history, MetricKind kind);

}  // namespace ibiumad
