#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ibiumad/trainer.hpp"

namespace ibiumad {

struct AblationRow {
  std::string label;
  bool use_mamba = true;
  bool use_ibfm = true;
  FusionKind fusion = FusionKind::kCrossAttention;
  RunSummary summary;
};

/// Mamba × IBFM grid: (off,off), (on,off), (off,on), (on,on).
std::vector<AblationRow> component_grid();
/// Full model with each fusion kind: addition, concatfc, linearglu, cross_attention.
std::vector<AblationRow> fusion_grid();

/// Runs each row of `rows` on one shared dataset and fills in its summary.
void run_ablation(const ExperimentConfig& base, const Dataset& ds, std::vector<AblationRow>& rows,
                  const std::function<void(const std::string&)>& log = {});

struct InjectionRow {
  double redundant_intensity = 0.0;
  double spurious_strength = 0.0;
  RunSummary summary;
};

/// Every intensity, each without and with spurious injection at
/// `spurious_strength`, on the same clean base dataset.
std::vector<InjectionRow> run_injection_study(const ExperimentConfig& base, const Dataset& clean,
                                              const std::vector<double>& intensities, double spurious_strength,
                                              const std::function<void(const std::string&)>& log = {});

std::string ablation_table(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string injection_table(const std::vector<InjectionRow>& rows);
std::string injection_csv(const std::vector<InjectionRow>& rows);

}  // namespace ibiumad
