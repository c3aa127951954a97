#pragma once

#include <string>
#include <vector>

#include "ibiumad/dataset.hpp"
#include "ibiumad/trainer.hpp"

namespace ibiumad {

/// `step,object,iauroc,pauroc,aupro`, one row per (step, seen object);
/// values printed with 17 significant digits so they read back exactly.
void write_metrics_csv(const std::string& path, const MetricsHistory& history);
MetricsHistory read_metrics_csv(const std::string& path);

/// JSON text: per-seed final means and FM, then mean/std over seeds. An
/// undefined FM is written as "--".
std::string summary_json(const RunSummary& s, const std::string& setting, const std::string& config_hash);

/// Line chart of a metric against step: one thin line per object (mean
/// over seeds) and a thick line for the object average.
std::string accuracy_chart_svg(const std::vector<MetricsHistory>& histories, MetricKind kind);

/// Three panels side by side: RGB, anomaly heat (scaled to `vmax`), mask.
void write_heatmap(const std::string& path, const MultimodalSample& sample, const AnomalyScoreMap& map, double vmax);

/// Writes config.txt, summary.json, timing.json, one SVG per metric kind and
/// per seed `seed_<s>/metrics.csv` plus heatmaps when maps were kept.
void write_run_report(const RunReport& report, const Dataset& ds, const std::string& dir);

/// Rebuilds summary.json and the charts from the per-seed CSVs in `dir`.
RunSummary report_from_directory(const std::string& dir);

}  // namespace ibiumad
