#include "ibiumad/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "ibiumad/checkpoint.hpp"
#include "ibiumad/errors.hpp"
#include "ibiumad/injection.hpp"

namespace ibiumad {

bool AccessAudit::begin_step(std::size_t step, std::vector<int> allowed) {
  // Training a step in several calls continues the open entry.
  if (step + 1 == reads_.size()) {
    if (allowed != allowed_.back()) throw std::logic_error("audit step resumed with a different object set");
    return false;
  }
  if (step != reads_.size()) throw std::logic_error("audit steps must start in order");
  reads_.emplace_back();
  allowed_.push_back(std::move(allowed));
  return true;
}

void AccessAudit::record_read(int object) {
  if (reads_.empty()) throw std::logic_error("audit read outside a step");
  ++reads_.back()[object];
}

std::size_t AccessAudit::reads(std::size_t step, int object) const {
  if (step >= reads_.size()) return 0;
  auto it = reads_[step].find(object);
  return it == reads_[step].end() ? 0 : it->second;
}

std::size_t AccessAudit::foreign_reads() const {
  std::size_t total = 0;
  for (std::size_t s = 0; s < reads_.size(); ++s)
    for (const auto& [obj, n] : reads_[s])
      if (std::find(allowed_[s].begin(), allowed_[s].end(), obj) == allowed_[s].end()) total += n;
  return total;
}

std::size_t AccessAudit::prior_step_reads() const {
  std::size_t total = 0;
  for (std::size_t s = 1; s < reads_.size(); ++s)
    for (const auto& [obj, n] : reads_[s])
      for (std::size_t p = 0; p < s; ++p)
        if (std::find(allowed_[p].begin(), allowed_[p].end(), obj) != allowed_[p].end()) total += n;
  return total;
}

Dataset apply_injections(const Dataset& ds, double spurious_strength, double redundant_intensity, std::uint64_t seed) {
  if (spurious_strength == 0.0 && redundant_intensity == 0.0) return ds;
  Dataset out = ds;
  const std::size_t n = ds.objects.size();
  Rng root(seed ^ 0x5bd1e995ULL);
  for (std::size_t o = 0; o < n; ++o) {
    Rng rng = root.fork(o);
    auto inject = [&](MultimodalSample& s, std::size_t i) {
      if (spurious_strength > 0.0 && n > 1) {
        // Any object but this one, drawn per sample.
        const auto pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n) - 2));
        const auto& source = ds.objects[(o + 1 + pick) % n].train;
        if (!source.empty()) s = inject_spurious(s, source[i % source.size()], spurious_strength, rng.next());
      }
      if (redundant_intensity > 0.0) s = inject_redundant(s, redundant_intensity, rng.next());
    };
    for (std::size_t i = 0; i < out.objects[o].train.size(); ++i) inject(out.objects[o].train[i], i);
    for (std::size_t i = 0; i < out.objects[o].test.size(); ++i) inject(out.objects[o].test[i], i);
  }
  return out;
}

Dataset prepare_dataset(const ExperimentConfig& cfg) {
  Dataset ds;
  if (cfg.dataset_path.empty()) {
    SynthSpec spec;
    spec.n_objects = cfg.synth_objects;
    spec.per_object_train = cfg.synth_train;
    spec.per_object_test = cfg.synth_test;
    spec.image_hw = cfg.model.image_size;
    spec.seed = cfg.synth_seed;
    ds = generate_synthetic_dataset(spec);
  } else {
    ds = load_dataset(cfg.dataset_path);
    if (ds.height != cfg.model.image_size || ds.width != cfg.model.image_size)
      throw ConfigError("dataset images are " + std::to_string(ds.height) + "x" + std::to_string(ds.width) +
                        " but dataset.image_size is " + std::to_string(cfg.model.image_size));
  }
  return apply_injections(ds, cfg.spurious_strength, cfg.redundant_intensity, cfg.synth_seed);
}

namespace {

ModelConfig model_config_for(const ExperimentConfig& cfg, const Dataset& ds) {
  ModelConfig m = cfg.model;
  // One class per object, so the classifier can tell every object apart.
  m.num_classes = std::max<std::size_t>(1, ds.num_objects());
  return m;
}

}  // namespace

IncrementalTrainer::IncrementalTrainer(const ExperimentConfig& cfg, const Dataset& ds, std::uint64_t seed)
    : cfg_(cfg),
      ds_(ds),
      model_(model_config_for(cfg, ds), seed),
      optimizer_(cfg.lr, cfg.momentum),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL),
      cache_(!cfg.model.train_encoder) {}

EncodedSample IncrementalTrainer::encoded_train(int object, std::size_t index) {
  audit_.record_read(object);
  const MultimodalSample& s = ds_.objects.at(object).train.at(index);
  if (!cache_) return model_.encode(s);
  auto key = std::make_pair(object, index);
  auto it = train_cache_.find(key);
  if (it == train_cache_.end()) {
    NoGradGuard no_grad;
    it = train_cache_.emplace(key, model_.encode(s)).first;
  }
  return it->second;
}

EncodedSample IncrementalTrainer::encoded_test(int object, std::size_t index) {
  NoGradGuard no_grad;
  const MultimodalSample& s = ds_.objects.at(object).test.at(index);
  if (!cache_) return model_.encode(s);
  auto key = std::make_pair(object, index);
  auto it = test_cache_.find(key);
  if (it == test_cache_.end()) it = test_cache_.emplace(key, model_.encode(s)).first;
  return it->second;
}

double IncrementalTrainer::train_step(std::size_t step, const std::vector<int>& objects, std::size_t epochs) {
  const bool fresh = audit_.begin_step(step, objects);
  if (fresh && step > 0 && cfg_.reset_optimizer) optimizer_.reset();
  std::vector<std::pair<int, std::size_t>> items;
  for (int o : objects) {
    if (o < 0 || static_cast<std::size_t>(o) >= ds_.num_objects())
      throw IngestionError("schedule references object " + std::to_string(o) + " which the dataset does not have");
    for (std::size_t i = 0; i < ds_.objects[o].train.size(); ++i) items.emplace_back(o, i);
  }
  if (items.empty() && epochs > 0) throw IngestionError("step " + std::to_string(step) + " has no training samples");

  const ParamSet params = model_.parameters();
  const std::vector<Tensor> trainable = params.trainable();
  double last_epoch_loss = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(items.begin(), items.end(), rng_.engine());
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < items.size(); b += cfg_.batch) {
      const std::size_t end = std::min(items.size(), b + cfg_.batch);
      const double inv = 1.0 / static_cast<double>(end - b);
      params.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const auto [obj, idx] = items[k];
        const EncodedSample enc = encoded_train(obj, idx);
        ForwardResult r = model_.forward(enc, obj, true, rng_);
        Tensor loss = scale(total_loss(r.losses), inv);
        loss.backward();
        epoch_loss += loss.item();
      }
      clip_grad_norm(trainable, cfg_.grad_clip);
      optimizer_.step(trainable);
    }
    last_epoch_loss = epoch_loss * static_cast<double>(cfg_.batch) / static_cast<double>(items.size());
  }
  return last_epoch_loss;
}

std::vector<AnomalyScoreMap> IncrementalTrainer::score_object(int object) {
  const auto& test = ds_.objects.at(object).test;
  std::vector<AnomalyScoreMap> maps;
  maps.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto f = model_.evaluate(encoded_test(object, i));
    if (f.disc_prob.defined()) {
      const std::vector<double> cells(f.disc_prob.data().begin(), f.disc_prob.data().end());
      maps.push_back(score_map(cells, f.disc_prob.dim(1), f.disc_prob.dim(2), test[i].height(), test[i].width(),
                               cfg_.score_sigma));
    } else {
      maps.push_back(anomaly_map(f.target, f.fused_g, test[i].height(), test[i].width(), cfg_.score_sigma));
    }
  }
  return maps;
}

MetricRecord IncrementalTrainer::evaluate_object(int object, std::vector<AnomalyScoreMap>* keep) {
  const auto& test = ds_.objects.at(object).test;
  std::vector<AnomalyScoreMap> maps = score_object(object);
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<std::vector<std::uint8_t>> masks(test.size());
  std::vector<PixelSample> pixels;
  for (std::size_t i = 0; i < test.size(); ++i) {
    scores.push_back(maps[i].image_score);
    labels.push_back(test[i].is_anomalous ? 1 : 0);
    const std::size_t hw = maps[i].height * maps[i].width;
    masks[i].assign(hw, 0);
    if (test[i].anomaly_mask)
      for (std::size_t p = 0; p < hw; ++p) masks[i][p] = test[i].anomaly_mask->data()[p] > 0.5 ? 1 : 0;
    pixels.push_back({maps[i].map, masks[i], maps[i].height, maps[i].width});
  }
  MetricRecord r;
  r.iauroc = auroc(scores, labels);
  r.pauroc = pixel_auroc(pixels);
  r.aupro = aupro(pixels);
  if (keep) *keep = std::move(maps);
  return r;
}

SeedRun run_seed(const ExperimentConfig& cfg, const Dataset& ds, const IncrementalSchedule& schedule,
                 std::uint64_t seed, const RunOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  IncrementalTrainer trainer(cfg, ds, seed);
  SeedRun run;
  run.seed = seed;
  run.final_maps.resize(ds.num_objects());
  for (std::size_t step = 0; step < schedule.steps.size(); ++step) {
    const double loss = trainer.train_step(step, schedule.steps[step], schedule.epochs_for(step));
    run.step_losses.push_back(loss);
    const bool last = step + 1 == schedule.steps.size();
    for (int o : schedule.seen_through(step)) {
      std::vector<AnomalyScoreMap> maps;
      run.history.record(static_cast<int>(step), o,
                         trainer.evaluate_object(o, last && opts.keep_maps ? &maps : nullptr));
      if (last && opts.keep_maps) run.final_maps[o] = std::move(maps);
    }
    if (opts.log) {
      double mean = 0;
      const auto objs = run.history.objects_at(static_cast<int>(step));
      for (int o : objs) mean += run.history.at(static_cast<int>(step), o).iauroc;
      char buf[160];
      std::snprintf(buf, sizeof buf, "seed %llu step %zu/%zu: loss %.4f, mean I-AUROC over %zu objects %.4f",
                    static_cast<unsigned long long>(seed), step + 1, schedule.steps.size(), loss, objs.size(),
                    mean / static_cast<double>(objs.size()));
      opts.log(buf);
    }
  }
  run.audit = trainer.audit();
  if (!opts.checkpoint_dir.empty()) {
    const auto dir = std::filesystem::path(opts.checkpoint_dir) / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    save_checkpoint((dir / "model.ckpt").string(), trainer.model().parameters());
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

RunSummary summarize(const std::vector<std::pair<std::uint64_t, MetricsHistory>>& runs) {
  RunSummary out;
  constexpr std::array<MetricKind, 3> kinds = {MetricKind::kImageAuroc, MetricKind::kPixelAuroc, MetricKind::kAupro};
  for (const auto& [seed, h] : runs) {
    RunSummary::PerSeed ps;
    ps.seed = seed;
    const auto steps = h.steps();
    if (steps.empty()) throw MetricError("summary: seed " + std::to_string(seed) + " has no evaluations");
    const auto objs = h.objects_at(steps.back());
    for (int o : objs) {
      const MetricRecord& r = h.at(steps.back(), o);
      ps.final_mean.iauroc += r.iauroc / static_cast<double>(objs.size());
      ps.final_mean.pauroc += r.pauroc / static_cast<double>(objs.size());
      ps.final_mean.aupro += r.aupro / static_cast<double>(objs.size());
    }
    if (steps.size() >= 2)
      for (std::size_t k = 0; k < 3; ++k) ps.fm[k] = forgetting_metric(h, kinds[k]);
    out.seeds.push_back(ps);
  }
  const double n = static_cast<double>(out.seeds.size());
  auto mean_std = [&](auto get) {
    double m = 0, v = 0;
    for (const auto& s : out.seeds) m += get(s) / n;
    for (const auto& s : out.seeds) v += (get(s) - m) * (get(s) - m);
    return std::pair{m, out.seeds.size() > 1 ? std::sqrt(v / (n - 1)) : 0.0};
  };
  std::tie(out.mean.iauroc, out.std.iauroc) = mean_std([](const auto& s) { return s.final_mean.iauroc; });
  std::tie(out.mean.pauroc, out.std.pauroc) = mean_std([](const auto& s) { return s.final_mean.pauroc; });
  std::tie(out.mean.aupro, out.std.aupro) = mean_std([](const auto& s) { return s.final_mean.aupro; });
  for (std::size_t k = 0; k < 3; ++k) {
    if (out.seeds.empty() || !std::all_of(out.seeds.begin(), out.seeds.end(), [&](const auto& s) { return s.fm[k].has_value(); }))
      continue;
    auto [m, s] = mean_std([&](const auto& ps) { return *ps.fm[k]; });
    out.fm_mean[k] = m;
    out.fm_std[k] = s;
  }
  return out;
}

RunReport run_incremental(const ExperimentConfig& cfg, const Dataset& ds, const RunOptions& opts) {
  validate_config(cfg);
  RunReport report;
  report.config = cfg;
  report.config_hash = config_hash(cfg);
  report.schedule = build_schedule(ds.num_objects(), cfg.setting);
  report.schedule.base_epochs = cfg.base_epochs;
  report.schedule.incr_epochs = cfg.incr_epochs;
  report.runs.resize(cfg.seeds.size());

  // Seeds are independent; each worker owns its model and RNG streams.
  std::mutex log_mutex;
  RunOptions worker_opts = opts;
  if (opts.log)
    worker_opts.log = [&](const std::string& msg) {
      std::lock_guard lock(log_mutex);
      opts.log(msg);
    };
  std::size_t next = 0;
  std::mutex next_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(next_mutex);
        if (next >= cfg.seeds.size() || failure) return;
        i = next++;
      }
      try {
        report.runs[i] = run_seed(cfg, ds, report.schedule, cfg.seeds[i], worker_opts);
      } catch (...) {
        std::lock_guard lock(next_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t nworkers = std::min(cfg.workers, cfg.seeds.size());
  if (nworkers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::pair<std::uint64_t, MetricsHistory>> histories;
  for (const auto& r : report.runs) histories.emplace_back(r.seed, r.history);
  report.summary = summarize(histories);
  return report;
}

RunReport run_incremental(const ExperimentConfig& cfg, const RunOptions& opts) {
  validate_config(cfg);
  const Dataset ds = prepare_dataset(cfg);
  return run_incremental(cfg, ds, opts);
}

}  // namespace ibiumad
