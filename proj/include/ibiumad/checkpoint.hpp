#pragma once

#include <string>

#include "ibiumad/params.hpp"

namespace ibiumad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary blob: magic, version, count, then per tensor its name, shape and
/// float64 values (little-endian).
void save_checkpoint(const std::string& path, const ParamSet& params);

/// Copies values into `params` by name. Throws std::runtime_error on a bad
/// header, DimensionError on a shape mismatch and std::out_of_range when a
/// parameter is missing from the file.
void load_checkpoint(const std::string& path, const ParamSet& params);

}  // namespace ibiumad
