#include "ibiumad/schedule.hpp"

#include <algorithm>
#include <regex>

#include "ibiumad/errors.hpp"

namespace ibiumad {

std::vector<int> IncrementalSchedule::seen_through(std::size_t step) const {
  std::vector<int> out;
  for (std::size_t s = 0; s <= step && s < steps.size(); ++s) out.insert(out.end(), steps[s].begin(), steps[s].end());
  std::sort(out.begin(), out.end());
  return out;
}

IncrementalSchedule build_schedule(std::size_t n_objects, const std::string& setting) {
  static const std::regex pattern(R"(^\s*(\d+)\s*-\s*(\d+)\s+with\s+(\d+)\s+steps?\s*$)");
  std::smatch m;
  if (!std::regex_match(setting, m, pattern))
    throw ConfigError("setting '" + setting + "' does not read as 'B-I with S steps'");
  const std::size_t base = std::stoul(m[1].str()), inc = std::stoul(m[2].str()), steps = std::stoul(m[3].str());
  if (base == 0) throw ConfigError("setting '" + setting + "': base step needs at least one object");
  if ((inc == 0) != (steps == 0))
    throw ConfigError("setting '" + setting + "': an increment of 0 objects goes with 0 steps and vice versa");
  if (base + inc * steps != n_objects)
    throw ConfigError("setting '" + setting + "' covers " + std::to_string(base + inc * steps) +
                      " objects but the dataset has " + std::to_string(n_objects));
  IncrementalSchedule s;
  int next = 0;
  s.steps.emplace_back();
  for (std::size_t i = 0; i < base; ++i) s.steps.back().push_back(next++);
  for (std::size_t t = 0; t < steps; ++t) {
    s.steps.emplace_back();
    for (std::size_t i = 0; i < inc; ++i) s.steps.back().push_back(next++);
  }
  return s;
}

}  // namespace ibiumad
