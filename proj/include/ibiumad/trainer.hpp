#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ibiumad/config.hpp"
#include "ibiumad/dataset.hpp"
#include "ibiumad/metrics.hpp"
#include "ibiumad/model.hpp"
#include "ibiumad/optim.hpp"
#include "ibiumad/schedule.hpp"
#include "ibiumad/scoring.hpp"

namespace ibiumad {

/// Counts every training-sample read per (step, object) so tests can prove
/// that a step only touched its own objects.
class AccessAudit {
 public:
  /// Opens `step`, or continues it when it is the step already open. Returns
  /// true when a new step was opened.
  bool begin_step(std::size_t step, std::vector<int> allowed);
  void record_read(int object);

  std::size_t reads(std::size_t step, int object) const;
  /// Reads during step `s` of objects not scheduled at `s`, summed over steps.
  std::size_t foreign_reads() const;
  /// Reads during step `s` of objects scheduled at some step < s.
  std::size_t prior_step_reads() const;
  std::size_t steps() const { return reads_.size(); }

 private:
  std::vector<std::map<int, std::size_t>> reads_;
  std::vector<std::vector<int>> allowed_;
};

/// Loads or synthesizes the dataset and applies the configured injections.
Dataset prepare_dataset(const ExperimentConfig& cfg);
/// Injections alone, applied to an already materialized dataset. Each
/// sample takes its spurious background from a random other object.
Dataset apply_injections(const Dataset& ds, double spurious_strength, double redundant_intensity, std::uint64_t seed);

/// One model trained through a schedule. Holds the optimizer state across
/// steps and, with a frozen encoder, caches clean feature pyramids.
class IncrementalTrainer {
 public:
  IncrementalTrainer(const ExperimentConfig& cfg, const Dataset& ds, std::uint64_t seed);

  /// Trains on the given objects only; returns the mean loss of the final
  /// epoch (NaN if no epoch ran).
  double train_step(std::size_t step, const std::vector<int>& objects, std::size_t epochs);
  /// Anomaly maps for an object's test split, in dataset order.
  std::vector<AnomalyScoreMap> score_object(int object);
  MetricRecord evaluate_object(int object, std::vector<AnomalyScoreMap>* maps = nullptr);

  IbIumadModel& model() { return model_; }
  const AccessAudit& audit() const { return audit_; }

 private:
  EncodedSample encoded_train(int object, std::size_t index);
  EncodedSample encoded_test(int object, std::size_t index);

  ExperimentConfig cfg_;
  const Dataset& ds_;
  IbIumadModel model_;
  Sgd optimizer_;
  Rng rng_;
  AccessAudit audit_;
  bool cache_ = false;
  std::map<std::pair<int, std::size_t>, EncodedSample> train_cache_, test_cache_;
};

struct SeedRun {
  std::uint64_t seed = 0;
  MetricsHistory history;
  AccessAudit audit;
  std::vector<double> step_losses;
  /// Final-step maps per object id (empty for objects never seen).
  std::vector<std::vector<AnomalyScoreMap>> final_maps;
  double seconds = 0.0;
};

struct RunOptions {
  bool keep_maps = false;
  /// When non-empty, each seed writes <dir>/seed_<seed>/model.ckpt after its final step.
  std::string checkpoint_dir;
  std::function<void(const std::string&)> log;
};

SeedRun run_seed(const ExperimentConfig& cfg, const Dataset& ds, const IncrementalSchedule& schedule,
                 std::uint64_t seed, const RunOptions& opts = {});

/// Mean/std over seeds of final-step metrics (averaged over objects) and FM.
struct RunSummary {
  struct PerSeed {
    std::uint64_t seed = 0;
    MetricRecord final_mean;
    std::array<std::optional<double>, 3> fm;  // indexed by MetricKind
  };
  std::vector<PerSeed> seeds;
  MetricRecord mean, std;
  std::array<std::optional<double>, 3> fm_mean, fm_std;
};

RunSummary summarize(const std::vector<std::pair<std::uint64_t, MetricsHistory>>& runs);

struct RunReport {
  ExperimentConfig config;
  IncrementalSchedule schedule;
  std::vector<SeedRun> runs;
  RunSummary summary;
  std::string config_hash;
};

/// The whole protocol for every configured seed (`workers` at a time).
RunReport run_incremental(const ExperimentConfig& cfg, const Dataset& ds, const RunOptions& opts = {});
RunReport run_incremental(const ExperimentConfig& cfg, const RunOptions& opts = {});

}  // namespace ibiumad
