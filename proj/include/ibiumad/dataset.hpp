#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ibiumad/sample.hpp"

namespace ibiumad {

struct ObjectData {
  std::string name;
  std::vector<MultimodalSample> train;  // normal only
  std::vector<MultimodalSample> test;   // normal and defective, every one with a mask
};

struct Dataset {
  std::vector<ObjectData> objects;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t num_objects() const { return objects.size(); }
};

struct SynthSpec {
  std::size_t n_objects = 10;
  std::size_t per_object_train = 16;
  /// Half (rounded down) are normal, the rest defective.
  std::size_t per_object_test = 12;
  std::size_t image_hw = 64;
  std::uint64_t seed = 0;
};

/// Procedural RGB-D objects: each has its own stripe frequency, orientation,
/// palette, background and depth relief. Defects repaint a disc of the
/// foreground with a foreign texture and dent the surface there; the mask
/// marks exactly the altered pixels. Values are pre-quantized to the PNG
/// bit depths so a save/load round trip is lossless.
Dataset generate_synthetic_dataset(const SynthSpec& spec);

/// Writes `<object>/<train|test>/<good|defect>/{rgb,depth,mask}_####.png`.
void save_dataset(const Dataset& ds, const std::string& root);

struct DatasetScan {
  std::size_t objects = 0;
  std::size_t train = 0;
  std::size_t test_good = 0;
  std::size_t test_defect = 0;
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
};

/// Checks layout and pairing without keeping the decoded images.
DatasetScan validate_dataset(const std::string& root);

/// Throws IngestionError listing every offending path.
Dataset load_dataset(const std::string& root);

}  // namespace ibiumad
