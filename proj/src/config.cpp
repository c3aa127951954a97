#include "ibiumad/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ibiumad/errors.hpp"

namespace ibiumad {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v, int) { return std::to_string(v); }

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define NUM_FIELD(key, member, T)                                                                  \
  {                                                                                                \
    key, Field {                                                                                   \
      [](ExperimentConfig& c, const std::string& v) { c.member = parse_number<T>(key, v); },       \
          [](const ExperimentConfig& c) { return fmt(c.member); }                                  \
    }                                                                                              \
  }
#define BOOL_FIELD(key, member)                                                                     \
  {                                                                                                 \
    key, Field {                                                                                    \
      [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(key, v); },             \
          [](const ExperimentConfig& c) { return fmt(c.member); }                                   \
    }                                                                                               \
  }

// Ordered as they appear in a dumped config.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"dataset.path", {[](ExperimentConfig& c, const std::string& v) { c.dataset_path = v; },
                        [](const ExperimentConfig& c) { return c.dataset_path; }}},
      NUM_FIELD("dataset.synthetic.objects", synth_objects, std::size_t),
      NUM_FIELD("dataset.synthetic.train_per_object", synth_train, std::size_t),
      NUM_FIELD("dataset.synthetic.test_per_object", synth_test, std::size_t),
      {"dataset.synthetic.seed", {[](ExperimentConfig& c, const std::string& v) {
                                    c.synth_seed = parse_number<std::uint64_t>("dataset.synthetic.seed", v);
                                  },
                                  [](const ExperimentConfig& c) { return fmt(c.synth_seed, 0); }}},
      NUM_FIELD("dataset.image_size", model.image_size, std::size_t),
      {"setting", {[](ExperimentConfig& c, const std::string& v) { c.setting = v; },
                   [](const ExperimentConfig& c) { return c.setting; }}},
      {"seeds", {[](ExperimentConfig& c, const std::string& v) {
                   c.seeds.clear();
                   for (const auto& s : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>("seeds", s));
                 },
                 [](const ExperimentConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(c.seeds[i]);
                   return out;
                 }}},
      {"model.channels", {[](ExperimentConfig& c, const std::string& v) {
                            const auto items = split_list(v);
                            if (items.size() != 4) throw ConfigError("model.channels needs 4 comma-separated widths");
                            for (std::size_t i = 0; i < 4; ++i)
                              c.model.channels[i] = parse_number<std::size_t>("model.channels", items[i]);
                          },
                          [](const ExperimentConfig& c) {
                            std::string out;
                            for (std::size_t i = 0; i < 4; ++i)
                              out += (i ? "," : "") + std::to_string(c.model.channels[i]);
                            return out;
                          }}},
      {"model.input", {[](ExperimentConfig& c, const std::string& v) { c.model.input_mode = parse_input_mode(v); },
                       [](const ExperimentConfig& c) { return std::string(input_mode_name(c.model.input_mode)); }}},
      BOOL_FIELD("model.mamba", model.use_mamba),
      BOOL_FIELD("model.ibfm", model.use_ibfm),
      {"model.fusion", {[](ExperimentConfig& c, const std::string& v) { c.model.fusion = parse_fusion_kind(v); },
                        [](const ExperimentConfig& c) { return std::string(fusion_kind_name(c.model.fusion)); }}},
      NUM_FIELD("model.bottleneck_ratio", model.bottleneck_ratio, double),
      NUM_FIELD("model.dropout", model.dropout, double),
      BOOL_FIELD("model.depth_three_channel", model.depth_three_channel),
      BOOL_FIELD("model.train_encoder", model.train_encoder),
      BOOL_FIELD("model.reconstruct_both_scales", model.reconstruct_both_scales),
      BOOL_FIELD("model.discriminator", model.discriminator),
      NUM_FIELD("loss.lambda_rgb", model.lambdas.rgb_cls, double),
      NUM_FIELD("loss.lambda_depth", model.lambdas.depth_cls, double),
      NUM_FIELD("loss.lambda_fusion", model.lambdas.fusion, double),
      NUM_FIELD("loss.lambda_ib", model.lambdas.ib, double),
      NUM_FIELD("jitter.probability", model.jitter.probability, double),
      NUM_FIELD("jitter.alpha_min", model.jitter.alpha_min, double),
      NUM_FIELD("jitter.alpha_max", model.jitter.alpha_max, double),
      NUM_FIELD("jitter.area_min", model.jitter.area_min, double),
      NUM_FIELD("jitter.area_max", model.jitter.area_max, double),
      NUM_FIELD("train.base_epochs", base_epochs, std::size_t),
      NUM_FIELD("train.incremental_epochs", incr_epochs, std::size_t),
      NUM_FIELD("train.batch", batch, std::size_t),
      NUM_FIELD("train.lr", lr, double),
      NUM_FIELD("train.momentum", momentum, double),
      BOOL_FIELD("train.reset_optimizer", reset_optimizer),
      NUM_FIELD("train.grad_clip", grad_clip, double),
      NUM_FIELD("inject.spurious_strength", spurious_strength, double),
      NUM_FIELD("inject.redundant_intensity", redundant_intensity, double),
      NUM_FIELD("score.sigma", score_sigma, double),
      {"output.dir", {[](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                      [](const ExperimentConfig& c) { return c.output_dir; }}},
      BOOL_FIELD("output.heatmaps", write_heatmaps),
      BOOL_FIELD("output.checkpoints", write_checkpoints),
      NUM_FIELD("run.workers", workers, std::size_t),
  };
  return table;
}

#undef NUM_FIELD
#undef BOOL_FIELD

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + assignment + "'");
  field(trim(assignment.substr(0, eq))).set(cfg, trim(assignment.substr(eq + 1)));
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      apply_override(cfg, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(cfg) + "\n";
  return out;
}

void validate_config(const ExperimentConfig& cfg) {
  validate_model_config(cfg.model);
  if (cfg.seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (cfg.batch == 0) throw ConfigError("train.batch must be >= 1");
  if (!(cfg.lr > 0)) throw ConfigError("train.lr must be positive");
  if (cfg.momentum < 0 || cfg.momentum >= 1) throw ConfigError("train.momentum must be in [0,1)");
  if (cfg.grad_clip < 0) throw ConfigError("train.grad_clip must be >= 0");
  if (cfg.spurious_strength < 0 || cfg.spurious_strength > 1)
    throw ConfigError("inject.spurious_strength must be in [0,1]");
  if (cfg.redundant_intensity < 0) throw ConfigError("inject.redundant_intensity must be >= 0");
  if (!(cfg.score_sigma > 0)) throw ConfigError("score.sigma must be positive");
  if (cfg.workers == 0) throw ConfigError("run.workers must be >= 1");
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ibiumad
