#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ibiumad/dataset.hpp"
#include "ibiumad/errors.hpp"
#include "ibiumad/injection.hpp"
#include "ibiumad/png_io.hpp"

using namespace ibiumad;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("ibiumad_test_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

Dataset small_set(std::size_t objects = 2) {
  SynthSpec spec;
  spec.n_objects = objects;
  spec.per_object_train = 3;
  spec.per_object_test = 4;
  spec.image_hw = 32;
  spec.seed = 7;
  return generate_synthetic_dataset(spec);
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a.at(i) - b.at(i));
  return s / static_cast<double>(a.numel());
}

}  // namespace

TEST_CASE("png round trips at both bit depths") {
  TempDir dir("png");
  Rng rng(1);
  std::vector<double> v(3 * 5 * 4);
  for (double& x : v) x = std::round(rng.uniform(0.0, 1.0) * 255.0) / 255.0;
  const Tensor rgb = Tensor::from({3, 5, 4}, v);
  png::write_rgb((dir.path / "a.png").string(), rgb);
  CHECK(same(png::read_rgb((dir.path / "a.png").string()), rgb));

  std::vector<double> d(5 * 4);
  for (double& x : d) x = std::round(rng.uniform(0.0, 1.0) * 65535.0) / 65535.0;
  const Tensor depth = Tensor::from({1, 5, 4}, d);
  png::write_depth((dir.path / "d.png").string(), depth);
  CHECK(same(png::read_depth((dir.path / "d.png").string()), depth));
  CHECK(png::read((dir.path / "d.png").string()).bit_depth == 16);

  CHECK_THROWS_AS(png::read((dir.path / "missing.png").string()), IngestionError);
}

TEST_CASE("synthetic dataset layout and masks") {
  const Dataset ds = small_set(3);
  REQUIRE(ds.num_objects() == 3);
  for (const auto& o : ds.objects) {
    CHECK(o.train.size() == 3);
    CHECK(o.test.size() == 4);
    for (const auto& s : o.train) CHECK_FALSE(s.is_anomalous);
    std::size_t defects = 0;
    for (const auto& s : o.test) {
      REQUIRE(s.anomaly_mask.has_value());
      double area = 0;
      for (double m : s.anomaly_mask->data()) area += m;
      CHECK((area > 0) == s.is_anomalous);
      defects += s.is_anomalous;
      CHECK_NOTHROW(validate_sample(s));
    }
    CHECK(defects == 2);
  }
}

TEST_CASE("saved datasets load back bit for bit") {
  TempDir dir("roundtrip");
  const Dataset ds = small_set();
  save_dataset(ds, dir.path.string());
  const DatasetScan scan = validate_dataset(dir.path.string());
  CHECK(scan.ok());
  CHECK(scan.objects == 2);
  CHECK(scan.train == 6);
  const Dataset back = load_dataset(dir.path.string());
  REQUIRE(back.num_objects() == ds.num_objects());
  for (std::size_t o = 0; o < ds.num_objects(); ++o) {
    CHECK(back.objects[o].name == ds.objects[o].name);
    REQUIRE(back.objects[o].test.size() == ds.objects[o].test.size());
    for (std::size_t i = 0; i < ds.objects[o].test.size(); ++i) {
      const auto &a = ds.objects[o].test[i], &b = back.objects[o].test[i];
      CHECK(same(a.rgb, b.rgb));
      CHECK(same(a.depth, b.depth));
      CHECK(same(*a.anomaly_mask, *b.anomaly_mask));
      CHECK(a.is_anomalous == b.is_anomalous);
    }
  }
}

TEST_CASE("ingestion errors name the offending file") {
  TempDir dir("broken");
  save_dataset(small_set(), dir.path.string());
  fs::path victim;
  for (const auto& e : fs::recursive_directory_iterator(dir.path))
    if (e.path().filename().string().rfind("depth_", 0) == 0) {
      victim = e.path();
      break;
    }
  REQUIRE_FALSE(victim.empty());
  fs::remove(victim);
  CHECK_FALSE(validate_dataset(dir.path.string()).ok());
  try {
    load_dataset(dir.path.string());
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find(victim.filename().string()) != std::string::npos);
  }

  TempDir empty("empty");
  try {
    load_dataset(empty.path.string());
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("no objects") != std::string::npos);
  }
}

TEST_CASE("spurious injection examples") {
  const Dataset ds = small_set();
  const MultimodalSample& s = ds.objects[0].train[0];
  const MultimodalSample& src = ds.objects[1].train[0];
  const MultimodalSample zero = inject_spurious(s, src, 0.0, 3);
  CHECK(same(zero.rgb, s.rgb));
  CHECK(same(zero.depth, s.depth));

  const MultimodalSample full = inject_spurious(s, src, 1.0, 3);
  const auto fg = foreground_mask(s.depth);
  const std::size_t n = s.height() * s.width();
  for (std::size_t i = 0; i < n; ++i)
    if (fg[i])
      for (std::size_t c = 0; c < 3; ++c) REQUIRE(full.rgb.at(c * n + i) == s.rgb.at(c * n + i));
  CHECK_FALSE(same(full.rgb, s.rgb));
  CHECK(full.object_id == s.object_id);
}

TEST_CASE("redundant injection examples") {
  const Dataset ds = small_set();
  const MultimodalSample& s = ds.objects[0].train[0];
  CHECK(same(inject_redundant(s, 0.0, 1).rgb, s.rgb));
  double prev = 0;
  for (double intensity : {0.1, 0.3, 0.6, 1.0}) {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const MultimodalSample r = inject_redundant(s, intensity, seed);
      for (double v : r.rgb.data()) REQUIRE((v >= 0.0 && v <= 1.0));
      for (double v : r.depth.data()) REQUIRE((v >= 0.0 && v <= 1.0));
      total += mean_abs_diff(r.rgb, s.rgb);
    }
    CHECK(total > prev);
    prev = total;
  }
}

TEST_CASE("perlin noise examples") {
  const auto a = perlin_noise(32, 32, 3, 9), b = perlin_noise(32, 32, 3, 9);
  CHECK(a == b);
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (double v : perlin_noise(24, 40, 4, seed)) REQUIRE((v >= -1.0 && v <= 1.0));
  // One octave, four cells across 32 pixels: lattice points every 8 pixels.
  const auto single = perlin_noise(32, 32, 1, 5, 4);
  for (std::size_t y = 0; y < 32; y += 8)
    for (std::size_t x = 0; x < 32; x += 8) CHECK(single[y * 32 + x] == doctest::Approx(0.0));
}

TEST_CASE("two objects are linearly separable on raw pixels") {
  SynthSpec spec;
  spec.n_objects = 2;
  spec.per_object_train = 16;
  spec.per_object_test = 2;
  spec.image_hw = 32;
  spec.seed = 3;
  const Dataset ds = generate_synthetic_dataset(spec);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int o = 0; o < 2; ++o)
    for (const auto& s : ds.objects[static_cast<std::size_t>(o)].train) {
      std::vector<double> f(s.rgb.data().begin(), s.rgb.data().end());
      f.insert(f.end(), s.depth.data().begin(), s.depth.data().end());
      f.push_back(1.0);
      x.push_back(std::move(f));
      y.push_back(o == 0 ? -1 : 1);
    }
  // Perceptron probe.
  std::vector<double> w(x[0].size(), 0.0);
  auto score = [&](const std::vector<double>& f) {
    double s = 0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
    return s;
  };
  for (int epoch = 0; epoch < 50; ++epoch)
    for (std::size_t i = 0; i < x.size(); ++i)
      if (y[i] * score(x[i]) <= 0)
        for (std::size_t k = 0; k < w.size(); ++k) w[k] += y[i] * x[i][k];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) correct += y[i] * score(x[i]) > 0;
  CHECK(static_cast<double>(correct) / static_cast<double>(x.size()) > 0.9);
}
