#include "ibiumad/experiments.hpp"

#include <cstdio>

namespace ibiumad {

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string pct(const std::optional<double>& v) { return v ? pct(*v) : "--"; }

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string g17(const std::optional<double>& v) { return v ? g17(*v) : "--"; }

constexpr std::size_t kI = static_cast<std::size_t>(MetricKind::kImageAuroc);

}  // namespace

std::vector<AblationRow> component_grid() {
  return {{"mamba=off ibfm=off", false, false, FusionKind::kCrossAttention, {}},
          {"mamba=on  ibfm=off", true, false, FusionKind::kCrossAttention, {}},
          {"mamba=off ibfm=on", false, true, FusionKind::kCrossAttention, {}},
          {"mamba=on  ibfm=on", true, true, FusionKind::kCrossAttention, {}}};
}

std::vector<AblationRow> fusion_grid() {
  std::vector<AblationRow> rows;
  for (FusionKind k : {FusionKind::kAddition, FusionKind::kConcatFc, FusionKind::kLinearGlu, FusionKind::kCrossAttention})
    rows.push_back({std::string("fusion=") + fusion_kind_name(k), true, true, k, {}});
  return rows;
}

void run_ablation(const ExperimentConfig& base, const Dataset& ds, std::vector<AblationRow>& rows,
                  const std::function<void(const std::string&)>& log) {
  for (auto& row : rows) {
    ExperimentConfig cfg = base;
    cfg.model.use_mamba = row.use_mamba;
    cfg.model.use_ibfm = row.use_ibfm;
    cfg.model.fusion = row.fusion;
    if (log) log("ablation: " + row.label);
    row.summary = run_incremental(cfg, ds).summary;
  }
}

std::vector<InjectionRow> run_injection_study(const ExperimentConfig& base, const Dataset& clean,
                                              const std::vector<double>& intensities, double spurious_strength,
                                              const std::function<void(const std::string&)>& log) {
  std::vector<InjectionRow> rows;
  for (double spurious : {0.0, spurious_strength})
    for (double intensity : intensities) {
      InjectionRow row;
      row.redundant_intensity = intensity;
      row.spurious_strength = spurious;
      ExperimentConfig cfg = base;
      cfg.redundant_intensity = intensity;
      cfg.spurious_strength = spurious;
      if (log) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "injection: redundant %.2f, spurious %.2f", intensity, spurious);
        log(buf);
      }
      const Dataset ds = apply_injections(clean, spurious, intensity, cfg.synth_seed);
      row.summary = run_incremental(cfg, ds).summary;
      rows.push_back(std::move(row));
    }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "variant                    I-AUROC   P-AUROC   AUPRO     FM(I-AUROC)\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-26s %-9s %-9s %-9s %s\n", r.label.c_str(), pct(r.summary.mean.iauroc).c_str(),
                  pct(r.summary.mean.pauroc).c_str(), pct(r.summary.mean.aupro).c_str(), pct(r.summary.fm_mean[kI]).c_str());
    out += buf;
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,mamba,ibfm,fusion,iauroc,pauroc,aupro,fm_iauroc\n";
  for (const auto& r : rows)
    out += r.label + "," + (r.use_mamba ? "1" : "0") + "," + (r.use_ibfm ? "1" : "0") + "," + fusion_kind_name(r.fusion) +
           "," + g17(r.summary.mean.iauroc) + "," + g17(r.summary.mean.pauroc) + "," + g17(r.summary.mean.aupro) + "," +
           g17(r.summary.fm_mean[kI]) + "\n";
  return out;
}

std::string injection_table(const std::vector<InjectionRow>& rows) {
  std::string out = "redundant  spurious   I-AUROC   AUPRO     FM(I-AUROC)\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10.2f %-10.2f %-9s %-9s %s\n", r.redundant_intensity, r.spurious_strength,
                  pct(r.summary.mean.iauroc).c_str(), pct(r.summary.mean.aupro).c_str(),
                  pct(r.summary.fm_mean[kI]).c_str());
    out += buf;
  }
  return out;
}

std::string injection_csv(const std::vector<InjectionRow>& rows) {
  std::string out = "redundant,spurious,iauroc,pauroc,aupro,fm_iauroc\n";
  for (const auto& r : rows)
    out += g17(r.redundant_intensity) + "," + g17(r.spurious_strength) + "," + g17(r.summary.mean.iauroc) + "," +
           g17(r.summary.mean.pauroc) + "," + g17(r.summary.mean.aupro) + "," + g17(r.summary.fm_mean[kI]) + "\n";
  return out;
}

}  // namespace ibiumad
