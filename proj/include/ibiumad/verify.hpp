#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ibiumad::verify {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Suite {
  std::string name;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool passed() const;
};

/// Finite-difference checks (h = 1e-5, threshold 1e-4) of every
/// differentiable op and composite block, `instances` random draws each.
Suite gradient_suite(int instances = 20, std::uint64_t seed = 11);
/// Chain-rule identity, KL-zero implication, data processing, oracle
/// agreement for MI and conditional MI.
Suite information_suite(std::uint64_t seed = 23);
/// auroc / aupro / forgetting_metric against their brute-force oracles.
Suite metric_suite(std::uint64_t seed = 37);
/// The worked forgetting examples.
Suite forgetting_examples();

std::vector<Suite> run_all();
/// One line per check plus a per-suite verdict.
std::string format(const std::vector<Suite>& suites);

}  // namespace ibiumad::verify
