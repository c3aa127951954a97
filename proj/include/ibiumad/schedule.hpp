#pragma once

#include <string>
#include <vector>

namespace ibiumad {

/// Object ids (0-based dataset order) learned at each step.
struct IncrementalSchedule {
  std::vector<std::vector<int>> steps;
  std::size_t base_epochs = 0;
  std::size_t incr_epochs = 0;

  std::size_t epochs_for(std::size_t step) const { return step == 0 ? base_epochs : incr_epochs; }
  /// Objects learned at or before `step`, ascending.
  std::vector<int> seen_through(std::size_t step) const;
};

/// Parses "B-I with S steps" (B + I·S must equal n_objects, S >= 1) or
/// "B-0 with 0 step" (B == n_objects). Throws ConfigError otherwise.
IncrementalSchedule build_schedule(std::size_t n_objects, const std::string& setting);

}  // namespace ibiumad
