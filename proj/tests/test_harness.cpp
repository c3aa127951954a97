#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ibiumad/checkpoint.hpp"
#include "ibiumad/config.hpp"
#include "ibiumad/errors.hpp"
#include "ibiumad/report.hpp"
#include "ibiumad/schedule.hpp"
#include "ibiumad/trainer.hpp"

using namespace ibiumad;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(std::size_t objects, const std::string& setting) {
  ExperimentConfig c;
  c.synth_objects = objects;
  c.synth_train = 2;
  c.synth_test = 4;
  c.setting = setting;
  c.seeds = {0};
  c.model.image_size = 32;
  c.model.channels = {4, 4, 8, 8};
  c.model.num_classes = objects;
  c.base_epochs = 1;
  c.incr_epochs = 1;
  c.batch = 2;
  c.lr = 0.01;
  c.write_heatmaps = false;
  c.write_checkpoints = false;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("schedule examples") {
  const auto a = build_schedule(10, "6-1 with 4 steps");
  CHECK(a.steps == std::vector<std::vector<int>>{{0, 1, 2, 3, 4, 5}, {6}, {7}, {8}, {9}});
  const auto b = build_schedule(10, "6-4 with 1 step");
  CHECK(b.steps == std::vector<std::vector<int>>{{0, 1, 2, 3, 4, 5}, {6, 7, 8, 9}});
  const auto c = build_schedule(10, "10-0 with 0 step");
  CHECK(c.steps.size() == 1);
  CHECK(c.steps[0].size() == 10);
  CHECK(a.seen_through(2) == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK_THROWS_AS(build_schedule(10, "6-1 with 3 steps"), ConfigError);
  CHECK_THROWS_AS(build_schedule(10, "six objects"), ConfigError);
}

TEST_CASE("config text round trips and rejects bad input") {
  ExperimentConfig c = tiny_config(3, "2-1 with 1 step");
  c.model.fusion = FusionKind::kLinearGlu;
  c.lr = 0.0123;
  const std::string text = dump_config(c);
  CHECK(dump_config(parse_config(text)) == text);
  CHECK(config_hash(parse_config(text)) == config_hash(c));
  apply_override(c, "train.lr=0.5");
  CHECK(c.lr == 0.5);
  CHECK(config_hash(c) != config_hash(parse_config(text)));
  CHECK_THROWS_AS(parse_config("no.such.key = 1\n"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.lr=fast"), ConfigError);
}

TEST_CASE("checkpoints restore every parameter") {
  const fs::path path = fs::temp_directory_path() / "ibiumad_test.ckpt";
  ModelConfig mc;
  mc.image_size = 32;
  mc.channels = {4, 4, 8, 8};
  mc.num_classes = 3;
  const IbIumadModel a(mc, 1), b(mc, 2);
  save_checkpoint(path.string(), a.parameters());
  load_checkpoint(path.string(), b.parameters());
  const ParamSet pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto &x = pa.items()[i].tensor, &y = pb.items()[i].tensor;
    REQUIRE(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
  }
  mc.channels = {4, 4, 8, 16};
  const IbIumadModel wider(mc, 3);
  CHECK_THROWS(load_checkpoint(path.string(), wider.parameters()));
  fs::remove(path);
}

TEST_CASE("access audit counts reads by step") {
  AccessAudit audit;
  CHECK(audit.begin_step(0, {0, 1}));
  audit.record_read(0);
  audit.record_read(1);
  CHECK_FALSE(audit.begin_step(0, {0, 1}));
  CHECK(audit.begin_step(1, {2}));
  audit.record_read(2);
  CHECK(audit.prior_step_reads() == 0);
  CHECK(audit.foreign_reads() == 0);
  audit.record_read(0);
  CHECK(audit.prior_step_reads() == 1);
  CHECK(audit.foreign_reads() == 1);
  CHECK(audit.reads(1, 0) == 1);
  CHECK_THROWS(audit.begin_step(3, {4}));
}

TEST_CASE("incremental training only touches current objects") {
  const ExperimentConfig c = tiny_config(3, "1-1 with 2 steps");
  const Dataset ds = prepare_dataset(c);
  IncrementalSchedule schedule = build_schedule(3, c.setting);
  schedule.base_epochs = c.base_epochs;
  schedule.incr_epochs = c.incr_epochs;
  const SeedRun r = run_seed(c, ds, schedule, 0);
  CHECK(r.audit.steps() == 3);
  CHECK(r.audit.prior_step_reads() == 0);
  CHECK(r.audit.foreign_reads() == 0);
  CHECK(r.audit.reads(2, 2) > 0);
  CHECK(r.history.objects_at(2) == std::vector<int>{0, 1, 2});
}

TEST_CASE("a unified run has one step and no forgetting value") {
  ExperimentConfig c = tiny_config(2, "2-0 with 0 step");
  const RunReport rep = run_incremental(c);
  REQUIRE(rep.runs.size() == 1);
  CHECK(rep.runs[0].history.steps().size() == 1);
  CHECK_FALSE(rep.summary.fm_mean[0].has_value());
  CHECK(summary_json(rep.summary, c.setting, rep.config_hash).find("\"--\"") != std::string::npos);
}

TEST_CASE("a frozen model cannot forget") {
  ExperimentConfig c = tiny_config(2, "1-1 with 1 step");
  c.base_epochs = 0;
  c.incr_epochs = 0;
  const RunReport rep = run_incremental(c);
  const MetricsHistory& h = rep.runs[0].history;
  CHECK(h.at(0, 0).iauroc == h.at(1, 0).iauroc);
  CHECK(h.at(0, 0).aupro == h.at(1, 0).aupro);
  CHECK(forgetting_metric(h, MetricKind::kImageAuroc) == 0.0);
}

TEST_CASE("runs are reproducible and reports agree with their CSVs") {
  const ExperimentConfig c = tiny_config(3, "2-1 with 1 step");
  const Dataset ds = prepare_dataset(c);
  const RunReport a = run_incremental(c, ds), b = run_incremental(c, ds);
  CHECK(a.config_hash == b.config_hash);
  const fs::path dir_a = fs::temp_directory_path() / "ibiumad_report_a";
  const fs::path dir_b = fs::temp_directory_path() / "ibiumad_report_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  write_run_report(a, ds, dir_a.string());
  write_run_report(b, ds, dir_b.string());
  const std::string csv = slurp(dir_a / "seed_0" / "metrics.csv");
  CHECK(csv == slurp(dir_b / "seed_0" / "metrics.csv"));

  // Header plus one row per (step, seen object): 2 + 3.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  const MetricsHistory back = read_metrics_csv((dir_a / "seed_0" / "metrics.csv").string());
  CHECK(forgetting_metric(back, MetricKind::kImageAuroc) ==
        forgetting_metric(a.runs[0].history, MetricKind::kImageAuroc));
  const RunSummary again = report_from_directory(dir_a.string());
  CHECK(again.fm_mean[0] == a.summary.fm_mean[0]);

  write_run_report(a, ds, dir_a.string());
  CHECK(slurp(dir_a / "seed_0" / "metrics.csv") == csv);
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("the optional discriminator trains and scores") {
  ExperimentConfig c = tiny_config(2, "1-1 with 1 step");
  c.model.discriminator = true;
  c.model.jitter.probability = 1.0;
  const RunReport rep = run_incremental(c);
  const MetricsHistory& h = rep.runs[0].history;
  CHECK(h.has(1, 0));
  CHECK(h.at(1, 1).iauroc >= 0.0);
  ExperimentConfig round = parse_config(dump_config(c));
  CHECK(round.model.discriminator);
}
