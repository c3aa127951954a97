#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ibiumad/config.hpp"
#include "ibiumad/dataset.hpp"
#include "ibiumad/experiments.hpp"
#include "ibiumad/kernels.hpp"
#include "ibiumad/report.hpp"
#include "ibiumad/schedule.hpp"
#include "ibiumad/trainer.hpp"
#include "ibiumad/verify.hpp"

namespace fs = std::filesystem;
using namespace ibiumad;

namespace {

void log_line(const std::string& s) { std::cerr << s << std::endl; }

ExperimentConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& o : overrides) apply_override(cfg, o);
  validate_config(cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void print_summary(const RunSummary& s) {
  std::printf("final mean  I-AUROC %.2f  P-AUROC %.2f  AUPRO %.2f\n", 100 * s.mean.iauroc, 100 * s.mean.pauroc,
              100 * s.mean.aupro);
  if (s.fm_mean[0])
    std::printf("FM          I-AUROC %.2f  P-AUROC %.2f  AUPRO %.2f\n", 100 * *s.fm_mean[0], 100 * s.fm_mean[1].value_or(0),
                100 * s.fm_mean[2].value_or(0));
  else
    std::printf("FM          --\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental unified multimodal anomaly detection toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Kernel threads (default: IBIUMAD_THREADS or all cores)");

  // config init
  auto* config_cmd = app.add_subcommand("config", "Configuration files");
  config_cmd->require_subcommand(1);
  auto* config_init = config_cmd->add_subcommand("init", "Write every key with its default value");
  std::string config_out;
  config_init->add_option("path", config_out, "Output file (stdout when omitted)");

  // data synth / data validate
  auto* data_cmd = app.add_subcommand("data", "Datasets");
  data_cmd->require_subcommand(1);
  auto* synth_cmd = data_cmd->add_subcommand("synth", "Generate the procedural RGB-D dataset as PNG files");
  SynthSpec spec;
  std::string synth_out;
  synth_cmd->add_option("out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--objects", spec.n_objects, "Object count")->capture_default_str();
  synth_cmd->add_option("--train", spec.per_object_train, "Training samples per object")->capture_default_str();
  synth_cmd->add_option("--test", spec.per_object_test, "Test samples per object")->capture_default_str();
  synth_cmd->add_option("--size", spec.image_hw, "Image side in pixels")->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  auto* validate_cmd = data_cmd->add_subcommand("validate", "Check a dataset directory");
  std::string validate_path;
  validate_cmd->add_option("path", validate_path, "Dataset root")->required();

  // Experiment commands share a config path and overrides.
  std::string cfg_path;
  std::vector<std::string> overrides;
  auto add_config_args = [&](CLI::App* cmd) {
    cmd->add_option("config", cfg_path, "Config file (defaults when omitted)");
    cmd->add_option("-s,--set", overrides, "Override a key, e.g. -s train.lr=0.05");
  };
  auto* train_cmd = app.add_subcommand("train", "Train one seed through the schedule and save its checkpoint");
  add_config_args(train_cmd);
  std::uint64_t train_seed = 0;
  std::string train_out;
  train_cmd->add_option("--seed", train_seed, "Seed")->capture_default_str();
  train_cmd->add_option("-o,--out", train_out, "Output directory (default: output.dir)");

  auto* run_cmd = app.add_subcommand("run", "Full incremental protocol for every seed, with report");
  add_config_args(run_cmd);

  auto* ablate_cmd = app.add_subcommand("ablate", "Component (table5) or fusion (table6) ablation grid");
  add_config_args(ablate_cmd);
  std::string grid = "table5";
  ablate_cmd->add_option("--grid", grid, "table5 | table6")->check(CLI::IsMember({"table5", "table6"}))->capture_default_str();

  auto* inject_cmd = app.add_subcommand("inject-study", "Redundant-noise sweep with and without spurious background");
  add_config_args(inject_cmd);
  std::vector<double> intensities{0.0, 0.2, 0.5};
  double spurious = 0.5;
  inject_cmd->add_option("--intensities", intensities, "Redundant noise intensities")->delimiter(',');
  inject_cmd->add_option("--spurious", spurious, "Spurious blend strength")->capture_default_str();

  auto* verify_cmd = app.add_subcommand("verify", "Gradient, information and metric oracle suites");
  int instances = 20;
  verify_cmd->add_option("--instances", instances, "Random instances per gradient check")->capture_default_str();

  auto* report_cmd = app.add_subcommand("report", "Rebuild summary.json and charts from a run directory");
  std::string report_dir;
  report_cmd->add_option("dir", report_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) kernels::set_thread_count(threads);

  try {
    if (config_init->parsed()) {
      const std::string text = dump_config(ExperimentConfig{});
      if (config_out.empty()) std::cout << text;
      else write_text(config_out, text);
      return 0;
    }
    if (synth_cmd->parsed()) {
      const Dataset ds = generate_synthetic_dataset(spec);
      save_dataset(ds, synth_out);
      std::printf("wrote %zu objects to %s\n", ds.num_objects(), synth_out.c_str());
      return 0;
    }
    if (validate_cmd->parsed()) {
      const DatasetScan scan = validate_dataset(validate_path);
      std::printf("objects %zu, train %zu, test good %zu, test defect %zu\n", scan.objects, scan.train, scan.test_good,
                  scan.test_defect);
      for (const auto& p : scan.problems) std::printf("problem: %s\n", p.c_str());
      return scan.ok() ? 0 : 1;
    }
    if (train_cmd->parsed()) {
      ExperimentConfig cfg = config_from(cfg_path, overrides);
      const fs::path out = train_out.empty() ? fs::path(cfg.output_dir) : fs::path(train_out);
      const Dataset ds = prepare_dataset(cfg);
      IncrementalSchedule schedule = build_schedule(ds.num_objects(), cfg.setting);
      schedule.base_epochs = cfg.base_epochs;
      schedule.incr_epochs = cfg.incr_epochs;
      RunOptions opts;
      opts.checkpoint_dir = out.string();
      opts.log = log_line;
      const SeedRun run = run_seed(cfg, ds, schedule, train_seed, opts);
      write_metrics_csv((out / ("seed_" + std::to_string(train_seed)) / "metrics.csv").string(), run.history);
      std::printf("trained seed %llu in %.1f s; checkpoint in %s\n", static_cast<unsigned long long>(train_seed),
                  run.seconds, (out / ("seed_" + std::to_string(train_seed))).string().c_str());
      return 0;
    }
    if (run_cmd->parsed()) {
      ExperimentConfig cfg = config_from(cfg_path, overrides);
      const Dataset ds = prepare_dataset(cfg);
      RunOptions opts;
      opts.keep_maps = cfg.write_heatmaps;
      if (cfg.write_checkpoints) opts.checkpoint_dir = cfg.output_dir;
      opts.log = log_line;
      const RunReport report = run_incremental(cfg, ds, opts);
      write_run_report(report, ds, cfg.output_dir);
      print_summary(report.summary);
      std::printf("report written to %s\n", cfg.output_dir.c_str());
      return 0;
    }
    if (ablate_cmd->parsed()) {
      ExperimentConfig cfg = config_from(cfg_path, overrides);
      const Dataset ds = prepare_dataset(cfg);
      std::vector<AblationRow> rows = grid == "table5" ? component_grid() : fusion_grid();
      run_ablation(cfg, ds, rows, log_line);
      std::cout << ablation_table(rows);
      write_text(fs::path(cfg.output_dir) / (grid + ".csv"), ablation_csv(rows));
      return 0;
    }
    if (inject_cmd->parsed()) {
      ExperimentConfig cfg = config_from(cfg_path, overrides);
      // The study applies its own injections on top of the clean data.
      ExperimentConfig clean_cfg = cfg;
      clean_cfg.spurious_strength = 0.0;
      clean_cfg.redundant_intensity = 0.0;
      const Dataset clean = prepare_dataset(clean_cfg);
      const auto rows = run_injection_study(cfg, clean, intensities, spurious, log_line);
      std::cout << injection_table(rows);
      write_text(fs::path(cfg.output_dir) / "injection.csv", injection_csv(rows));
      return 0;
    }
    if (verify_cmd->parsed()) {
      std::vector<verify::Suite> suites;
      suites.push_back(verify::gradient_suite(instances));
      suites.push_back(verify::information_suite());
      suites.push_back(verify::metric_suite());
      suites.push_back(verify::forgetting_examples());
      std::cout << verify::format(suites);
      bool ok = true;
      double total = 0;
      for (const auto& s : suites) {
        ok = ok && s.passed();
        total += s.seconds;
      }
      std::printf("%s  verify (%.1f s)\n", ok ? "PASS" : "FAIL", total);
      return ok ? 0 : 1;
    }
    if (report_cmd->parsed()) {
      const RunSummary s = report_from_directory(report_dir);
      print_summary(s);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
