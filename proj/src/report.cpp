#include "ibiumad/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ibiumad/errors.hpp"
#include "ibiumad/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace ibiumad {

namespace {

constexpr std::array<MetricKind, 3> kKinds = {MetricKind::kImageAuroc, MetricKind::kPixelAuroc, MetricKind::kAupro};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json record_json(const MetricRecord& r) {
  return ordered_json{{"iauroc", r.iauroc}, {"pauroc", r.pauroc}, {"aupro", r.aupro}};
}

ordered_json fm_json(const std::array<std::optional<double>, 3>& fm) {
  ordered_json j = ordered_json::object();
  for (std::size_t k = 0; k < 3; ++k) j[metric_kind_name(kKinds[k])] = fm[k] ? ordered_json(*fm[k]) : ordered_json("--");
  return j;
}

// Jet-like ramp on [0,1].
std::array<std::uint16_t, 3> heat_colour(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto ch = [&](double centre) { return std::clamp(1.5 - std::abs(4.0 * t - centre), 0.0, 1.0); };
  return {static_cast<std::uint16_t>(std::lround(255 * ch(3.0))), static_cast<std::uint16_t>(std::lround(255 * ch(2.0))),
          static_cast<std::uint16_t>(std::lround(255 * ch(1.0)))};
}

}  // namespace

void write_metrics_csv(const std::string& path, const MetricsHistory& history) {
  std::string out = "step,object,iauroc,pauroc,aupro\n";
  for (const auto& [key, r] : history.records())
    out += std::to_string(key.first) + "," + std::to_string(key.second) + "," + g17(r.iauroc) + "," + g17(r.pauroc) +
           "," + g17(r.aupro) + "\n";
  write_text(path, out);
}

MetricsHistory read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IngestionError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line != "step,object,iauroc,pauroc,aupro")
    throw IngestionError(path + ": unexpected header");
  MetricsHistory h;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw IngestionError(path + ":" + std::to_string(lineno) + ": expected 5 columns");
    try {
      h.record(std::stoi(cells[0]), std::stoi(cells[1]),
               MetricRecord{std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])});
    } catch (const std::logic_error&) {
      throw IngestionError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return h;
}

std::string summary_json(const RunSummary& s, const std::string& setting, const std::string& config_hash) {
  ordered_json j;
  j["setting"] = setting;
  j["config_hash"] = config_hash;
  j["seeds"] = ordered_json::array();
  for (const auto& ps : s.seeds)
    j["seeds"].push_back(ordered_json{{"seed", ps.seed}, {"final", record_json(ps.final_mean)}, {"fm", fm_json(ps.fm)}});
  j["mean"] = record_json(s.mean);
  j["std"] = record_json(s.std);
  j["fm_mean"] = fm_json(s.fm_mean);
  j["fm_std"] = fm_json(s.fm_std);
  return j.dump(2) + "\n";
}

std::string accuracy_chart_svg(const std::vector<MetricsHistory>& histories, MetricKind kind) {
  // Mean over seeds per (step, object).
  std::map<std::pair<int, int>, std::pair<double, int>> acc;
  for (const auto& h : histories)
    for (const auto& [key, r] : h.records()) {
      auto& a = acc[key];
      a.first += r.get(kind);
      a.second += 1;
    }
  std::set<int> steps, objects;
  for (const auto& [key, _] : acc) {
    steps.insert(key.first);
    objects.insert(key.second);
  }
  const double W = 640, H = 400, left = 60, right = 120, top = 30, bottom = 50;
  const int max_step = steps.empty() ? 0 : *steps.rbegin();
  auto px = [&](int step) { return left + (max_step == 0 ? 0.5 : static_cast<double>(step) / max_step) * (W - left - right); };
  auto py = [&](double v) { return top + (1.0 - std::clamp(v, 0.0, 1.0)) * (H - top - bottom); };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"18\">" << metric_kind_name(kind) << " vs step</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << W - right << "\" y2=\"" << py(0) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << py(1) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    os << "<text x=\"" << left - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v * 100 << "</text>\n";
  }
  for (int s : steps)
    os << "<text x=\"" << px(s) << "\" y=\"" << H - bottom + 18 << "\" text-anchor=\"middle\">" << s + 1 << "</text>\n";
  os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">step</text>\n";

  std::map<int, double> mean_by_step;
  std::map<int, int> count_by_step;
  std::size_t idx = 0;
  for (int o : objects) {
    const auto c = heat_colour(objects.size() > 1 ? static_cast<double>(idx) / (objects.size() - 1) : 0.5);
    char colour[16];
    std::snprintf(colour, sizeof colour, "#%02x%02x%02x", c[0], c[1], c[2]);
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
    for (int s : steps) {
      auto it = acc.find({s, o});
      if (it == acc.end()) continue;
      const double v = it->second.first / it->second.second;
      mean_by_step[s] += v;
      count_by_step[s] += 1;
      os << px(s) << "," << py(v) << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - right + 8 << "\" y=\"" << top + 14 * idx << "\" fill=\"" << colour << "\">object " << o << "</text>\n";
    ++idx;
  }
  os << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"3\" points=\"";
  for (const auto& [s, sum] : mean_by_step) os << px(s) << "," << py(sum / count_by_step[s]) << " ";
  os << "\"/>\n";
  os << "<text x=\"" << W - right + 8 << "\" y=\"" << top + 14 * idx << "\" font-weight=\"bold\">mean</text>\n";
  os << "</svg>\n";
  return os.str();
}

void write_heatmap(const std::string& path, const MultimodalSample& sample, const AnomalyScoreMap& map, double vmax) {
  const std::size_t h = map.height, w = map.width, n = h * w;
  if (sample.height() != h || sample.width() != w) throw DimensionError("write_heatmap: sample and map sizes differ");
  std::vector<std::uint16_t> px(3 * n * 3);
  const std::size_t stride = 3 * w;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      std::uint16_t* row = px.data() + 3 * (y * stride);
      for (std::size_t c = 0; c < 3; ++c)
        row[3 * x + c] = static_cast<std::uint16_t>(std::lround(255 * sample.rgb.data()[c * n + i]));
      const auto hc = heat_colour(vmax > 0 ? map.map[i] / vmax : 0.0);
      for (std::size_t c = 0; c < 3; ++c) row[3 * (w + x) + c] = hc[c];
      const bool m = sample.anomaly_mask && sample.anomaly_mask->data()[i] > 0.5;
      for (std::size_t c = 0; c < 3; ++c) row[3 * (2 * w + x) + c] = m ? 255 : 0;
    }
  png::write(path, 3 * w, h, 3, 8, px);
}

void write_run_report(const RunReport& report, const Dataset& ds, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  write_text(root / "config.txt", dump_config(report.config));
  write_text(root / "summary.json", summary_json(report.summary, report.config.setting, report.config_hash));

  std::vector<MetricsHistory> histories;
  ordered_json timing = ordered_json::array();
  for (const auto& run : report.runs) {
    const fs::path sd = root / ("seed_" + std::to_string(run.seed));
    fs::create_directories(sd);
    write_metrics_csv((sd / "metrics.csv").string(), run.history);
    histories.push_back(run.history);
    timing.push_back(ordered_json{{"seed", run.seed}, {"seconds", run.seconds}});
    for (std::size_t o = 0; o < run.final_maps.size(); ++o) {
      const auto& maps = run.final_maps[o];
      if (maps.empty()) continue;
      const fs::path hd = sd / "heatmaps" / ds.objects[o].name;
      fs::create_directories(hd);
      double vmax = 0;
      for (const auto& m : maps) vmax = std::max(vmax, *std::max_element(m.map.begin(), m.map.end()));
      for (std::size_t i = 0; i < maps.size(); ++i) {
        char name[48];
        std::snprintf(name, sizeof name, "%s_%04zu.png", ds.objects[o].test[i].is_anomalous ? "defect" : "good", i);
        write_heatmap((hd / name).string(), ds.objects[o].test[i], maps[i], vmax);
      }
    }
  }
  write_text(root / "timing.json", timing.dump(2) + "\n");
  for (MetricKind k : kKinds)
    write_text(root / (std::string(metric_kind_name(k)) + "_vs_step.svg"), accuracy_chart_svg(histories, k));
}

RunSummary report_from_directory(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IngestionError("run directory " + dir + " does not exist");
  static const std::regex seed_dir(R"(seed_(\d+))");
  std::vector<std::pair<std::uint64_t, fs::path>> seeds;
  for (const auto& e : fs::directory_iterator(root)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (e.is_directory() && std::regex_match(name, m, seed_dir) && fs::exists(e.path() / "metrics.csv"))
      seeds.emplace_back(std::stoull(m[1].str()), e.path() / "metrics.csv");
  }
  if (seeds.empty()) throw IngestionError("no seed_*/metrics.csv under " + dir);
  std::sort(seeds.begin(), seeds.end());
  std::vector<std::pair<std::uint64_t, MetricsHistory>> runs;
  std::vector<MetricsHistory> histories;
  for (const auto& [seed, path] : seeds) {
    runs.emplace_back(seed, read_metrics_csv(path.string()));
    histories.push_back(runs.back().second);
  }
  std::string setting = "unknown", hash = "unknown";
  if (fs::exists(root / "config.txt")) {
    const ExperimentConfig cfg = load_config((root / "config.txt").string());
    setting = cfg.setting;
    hash = config_hash(cfg);
  }
  RunSummary s = summarize(runs);
  write_text(root / "summary.json", summary_json(s, setting, hash));
  for (MetricKind k : kKinds)
    write_text(root / (std::string(metric_kind_name(k)) + "_vs_step.svg"), accuracy_chart_svg(histories, k));
  return s;
}

}  // namespace ibiumad
