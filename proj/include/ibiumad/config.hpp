#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ibiumad/model.hpp"

namespace ibiumad {

struct ExperimentConfig {
  // Dataset: a directory in the documented layout, or synthetic when empty.
  std::string dataset_path;
  std::size_t synth_objects = 10;
  std::size_t synth_train = 16;
  std::size_t synth_test = 12;
  std::uint64_t synth_seed = 7;

  std::string setting = "6-1 with 4 steps";
  std::vector<std::uint64_t> seeds{0, 1, 2, 3};
  ModelConfig model;

  std::size_t base_epochs = 60;
  std::size_t incr_epochs = 40;
  std::size_t batch = 8;
  double lr = 1e-3;
  double momentum = 0.9;
  bool reset_optimizer = false;
  /// Global gradient-norm cap per update; 0 disables.
  double grad_clip = 1.0;

  /// Background blend strength from another object, 0 disables.
  double spurious_strength = 0.0;
  /// Perlin noise intensity, 0 disables.
  double redundant_intensity = 0.0;

  double score_sigma = 4.0;
  std::string output_dir = "runs/default";
  bool write_heatmaps = true;
  bool write_checkpoints = true;
  /// Seeds trained concurrently.
  std::size_t workers = 1;
};

/// Flat `key = value` text, `#` comments. Unknown keys and malformed values
/// throw ConfigError naming the line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Every key with its current value; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& cfg);
/// Applies one `key=value` override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
void validate_config(const ExperimentConfig& cfg);

/// FNV-1a of the dumped config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ibiumad
