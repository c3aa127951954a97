#pragma once

#include <stdexcept>
#include <string>

namespace ibiumad {

/// Tensor shapes or feature-map geometry that do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Model parameters outside their admissible domain (e.g. an SSM decay not in [0,1)).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad configuration values, unknown enum names, unschedulable settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset directory problems: orphan files, size mismatches, missing objects.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric that is undefined on its input (single-class AUROC, FM with one step, ...).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Oracle preconditions violated (e.g. a non-deterministic channel).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ibiumad
