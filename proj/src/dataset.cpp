#include "ibiumad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <regex>
#include <sstream>

#include "ibiumad/errors.hpp"
#include "ibiumad/png_io.hpp"
#include "ibiumad/rng.hpp"

namespace fs = std::filesystem;

namespace ibiumad {

namespace {

struct ObjectStyle {
  double freq, theta;
  std::array<double, 3> c1, c2, bg;
  double bg_freq;
  double rx, ry;
  double relief;  // exponent shaping the depth dome
};

ObjectStyle make_style(Rng& rng, std::size_t k, std::size_t n) {
  ObjectStyle s;
  s.freq = 3.0 + 5.0 * rng.uniform();
  s.theta = std::numbers::pi * static_cast<double>(k) / static_cast<double>(n) + rng.uniform(-0.1, 0.1);
  for (int c = 0; c < 3; ++c) {
    s.c1[c] = rng.uniform(0.25, 0.95);
    s.c2[c] = rng.uniform(0.05, 0.75);
    s.bg[c] = rng.uniform(0.05, 0.35);
  }
  s.bg_freq = rng.uniform(1.0, 4.0);
  s.rx = rng.uniform(0.28, 0.4);
  s.ry = rng.uniform(0.28, 0.4);
  s.relief = rng.uniform(0.5, 2.0);
  return s;
}

double q8(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }
double q16(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0; }

MultimodalSample render(const ObjectStyle& st, Rng rng, std::size_t hw, int object_id, bool defect, bool with_mask) {
  const std::size_t n = hw * hw;
  const double size = static_cast<double>(hw);
  const double cx = size * (0.5 + rng.uniform(-0.05, 0.05));
  const double cy = size * (0.5 + rng.uniform(-0.05, 0.05));
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ct = std::cos(st.theta), sn = std::sin(st.theta);

  // Defect disc placed well inside the ellipse.
  double dx0 = 0, dy0 = 0, dr = 0;
  std::array<double, 3> dcol{};
  if (defect) {
    const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi), rad = rng.uniform(0.0, 0.5);
    dx0 = cx + rad * st.rx * size * std::cos(ang);
    dy0 = cy + rad * st.ry * size * std::sin(ang);
    dr = size * rng.uniform(0.06, 0.11);
    for (int c = 0; c < 3; ++c) dcol[c] = 1.0 - st.c1[c];
  }

  std::vector<double> rgb(3 * n), depth(n), mask(n, 0.0);
  for (std::size_t y = 0; y < hw; ++y)
    for (std::size_t x = 0; x < hw; ++x) {
      const std::size_t i = y * hw + x;
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      const double ex = (px - cx) / (st.rx * size), ey = (py - cy) / (st.ry * size);
      const double r2 = ex * ex + ey * ey;
      std::array<double, 3> col;
      double d;
      if (r2 <= 1.0) {
        const double u = (px * ct + py * sn) / size;
        const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * st.freq * u + phase);
        for (int c = 0; c < 3; ++c) col[c] = st.c1[c] + (st.c2[c] - st.c1[c]) * t;
        d = 0.55 + 0.3 * std::pow(1.0 - r2, st.relief);
        const double ddx = px - dx0, ddy = py - dy0, dd2 = (ddx * ddx + ddy * ddy) / (dr * dr);
        if (defect && dd2 < 1.0) {
          // Foreign texture: orthogonal, finer stripes in the complementary colour.
          const double v = (-px * sn + py * ct) / size;
          const double t2 = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 2.0 * st.freq * v);
          for (int c = 0; c < 3; ++c) col[c] = dcol[c] * (0.6 + 0.4 * t2);
          d -= 0.2 * (1.0 - dd2) + 0.02;
          mask[i] = 1.0;
        }
      } else {
        const double band = 0.8 + 0.2 * std::sin(2.0 * std::numbers::pi * st.bg_freq * py / size);
        for (int c = 0; c < 3; ++c) col[c] = st.bg[c] * band;
        d = 0.15 + 0.05 * px / size;
      }
      for (int c = 0; c < 3; ++c) rgb[c * n + i] = q8(col[c] + rng.normal(0.0, 0.01));
      depth[i] = q16(d + rng.normal(0.0, 0.002));
    }

  MultimodalSample s;
  s.rgb = Tensor::from({3, hw, hw}, std::move(rgb));
  s.depth = Tensor::from({1, hw, hw}, std::move(depth));
  s.object_id = object_id;
  s.is_anomalous = defect && std::any_of(mask.begin(), mask.end(), [](double v) { return v > 0; });
  if (with_mask) s.anomaly_mask = Tensor::from({1, hw, hw}, std::move(mask));
  return s;
}

std::string object_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "obj_%02zu", k);
  return buf;
}

std::string indexed(const char* stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.png", stem, i);
  return buf;
}

// One leaf directory of the layout, e.g. obj_03/test/defect.
struct LeafEntry {
  fs::path rgb, depth, mask;
};

std::map<int, LeafEntry> scan_leaf(const fs::path& dir, bool expect_mask, std::vector<std::string>& problems) {
  static const std::regex pattern(R"((rgb|depth|mask)_(\d{4})\.png)");
  std::map<int, LeafEntry> entries;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    std::smatch m;
    const std::string name = p.filename().string();
    if (!fs::is_regular_file(p) || !std::regex_match(name, m, pattern)) {
      problems.push_back("unexpected file: " + p.string());
      continue;
    }
    LeafEntry& e = entries[std::stoi(m[2].str())];
    if (m[1] == "rgb") e.rgb = p;
    else if (m[1] == "depth") e.depth = p;
    else e.mask = p;
  }
  for (const auto& [idx, e] : entries) {
    const fs::path any = !e.rgb.empty() ? e.rgb : !e.depth.empty() ? e.depth : e.mask;
    if (e.rgb.empty()) problems.push_back("missing " + (dir / indexed("rgb", idx)).string() + " for " + any.string());
    if (e.depth.empty())
      problems.push_back("missing " + (dir / indexed("depth", idx)).string() + " for " + any.string());
    if (expect_mask && e.mask.empty())
      problems.push_back("missing " + (dir / indexed("mask", idx)).string() + " for " + any.string());
    if (!expect_mask && !e.mask.empty()) problems.push_back("orphan mask outside defect split: " + e.mask.string());
  }
  return entries;
}

// Walks the tree; with `load` set also decodes and size-checks every image.
Dataset walk(const std::string& root, bool load, DatasetScan& scan) {
  Dataset ds;
  if (!fs::is_directory(root)) {
    scan.problems.push_back("dataset root is not a directory: " + root);
    return ds;
  }
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
    else scan.problems.push_back("unexpected file: " + e.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    scan.problems.push_back("no objects found under " + root);
    return ds;
  }

  auto check_size = [&](const fs::path& p, std::size_t h, std::size_t w) {
    if (ds.height == 0) {
      ds.height = h;
      ds.width = w;
    } else if (h != ds.height || w != ds.width) {
      std::ostringstream os;
      os << "size mismatch: " << p.string() << " is " << h << "x" << w << ", expected " << ds.height << "x"
         << ds.width;
      scan.problems.push_back(os.str());
      return false;
    }
    return true;
  };

  for (std::size_t k = 0; k < dirs.size(); ++k) {
    ObjectData obj;
    obj.name = dirs[k].filename().string();
    const int id = static_cast<int>(k);
    struct Leaf {
      const char* split;
      const char* kind;
    };
    for (const Leaf leaf : {Leaf{"train", "good"}, Leaf{"test", "good"}, Leaf{"test", "defect"}}) {
      const fs::path dir = dirs[k] / leaf.split / leaf.kind;
      if (!fs::is_directory(dir)) {
        if (std::string(leaf.kind) == "good") scan.problems.push_back("missing directory: " + dir.string());
        continue;
      }
      const bool defect = std::string(leaf.kind) == "defect";
      const bool test = std::string(leaf.split) == "test";
      const auto entries = scan_leaf(dir, defect, scan.problems);
      for (const auto& [idx, e] : entries) {
        if (e.rgb.empty() || e.depth.empty() || (defect && e.mask.empty())) continue;
        (test ? (defect ? scan.test_defect : scan.test_good) : scan.train)++;
        if (!load) continue;
        try {
          MultimodalSample s;
          s.rgb = png::read_rgb(e.rgb.string());
          s.depth = png::read_depth(e.depth.string());
          s.object_id = id;
          bool sized = check_size(e.rgb, s.rgb.dim(1), s.rgb.dim(2));
          if (s.depth.dim(1) != s.rgb.dim(1) || s.depth.dim(2) != s.rgb.dim(2)) {
            scan.problems.push_back("size mismatch: " + e.depth.string() + " vs " + e.rgb.string());
            sized = false;
          }
          if (defect) {
            s.anomaly_mask = png::read_mask(e.mask.string());
            if (s.anomaly_mask->shape() != s.depth.shape()) {
              scan.problems.push_back("size mismatch: " + e.mask.string() + " vs " + e.rgb.string());
              sized = false;
            }
          } else if (test) {
            s.anomaly_mask = Tensor::zeros(s.depth.shape());
          }
          if (!sized) continue;
          s.is_anomalous = defect;
          validate_sample(s);
          (test ? obj.test : obj.train).push_back(std::move(s));
        } catch (const std::exception& ex) {
          scan.problems.push_back(ex.what());
        }
      }
    }
    ds.objects.push_back(std::move(obj));
  }
  scan.objects = ds.objects.size();
  return ds;
}

}  // namespace

Dataset generate_synthetic_dataset(const SynthSpec& spec) {
  if (spec.n_objects == 0) throw ConfigError("synthetic dataset needs at least one object");
  if (spec.image_hw < 16) throw ConfigError("synthetic image size must be at least 16");
  if (spec.per_object_test < 2) throw ConfigError("per_object_test must be >= 2 (normal and defective)");
  Rng root(spec.seed);
  Dataset ds;
  ds.height = ds.width = spec.image_hw;
  const std::size_t goods = spec.per_object_test / 2;
  for (std::size_t k = 0; k < spec.n_objects; ++k) {
    Rng rng = root.fork(k);
    const ObjectStyle style = make_style(rng, k, spec.n_objects);
    ObjectData obj;
    obj.name = object_name(k);
    const int id = static_cast<int>(k);
    for (std::size_t i = 0; i < spec.per_object_train; ++i)
      obj.train.push_back(render(style, rng.fork(i), spec.image_hw, id, false, false));
    for (std::size_t i = 0; i < spec.per_object_test; ++i)
      obj.test.push_back(render(style, rng.fork(1'000'000 + i), spec.image_hw, id, i >= goods, true));
    ds.objects.push_back(std::move(obj));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& root) {
  for (const auto& obj : ds.objects) {
    const fs::path base = fs::path(root) / obj.name;
    std::size_t good = 0, bad = 0;
    fs::create_directories(base / "train" / "good");
    for (std::size_t i = 0; i < obj.train.size(); ++i) {
      png::write_rgb((base / "train" / "good" / indexed("rgb", i)).string(), obj.train[i].rgb);
      png::write_depth((base / "train" / "good" / indexed("depth", i)).string(), obj.train[i].depth);
    }
    fs::create_directories(base / "test" / "good");
    fs::create_directories(base / "test" / "defect");
    for (const auto& s : obj.test) {
      const fs::path dir = base / "test" / (s.is_anomalous ? "defect" : "good");
      const std::size_t i = s.is_anomalous ? bad++ : good++;
      png::write_rgb((dir / indexed("rgb", i)).string(), s.rgb);
      png::write_depth((dir / indexed("depth", i)).string(), s.depth);
      if (s.is_anomalous) png::write_mask((dir / indexed("mask", i)).string(), *s.anomaly_mask);
    }
  }
}

DatasetScan validate_dataset(const std::string& root) {
  DatasetScan scan;
  walk(root, true, scan);
  return scan;
}

Dataset load_dataset(const std::string& root) {
  DatasetScan scan;
  Dataset ds = walk(root, true, scan);
  if (!scan.ok()) {
    std::ostringstream os;
    os << "dataset at " << root << " has " << scan.problems.size() << " problem(s):";
    for (const auto& p : scan.problems) os << "\n  " << p;
    throw IngestionError(os.str());
  }
  return ds;
}

}  // namespace ibiumad
