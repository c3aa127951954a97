#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ibiumad/tensor.hpp"

namespace ibiumad::png {

/// Decoded image with samples widened to 16 bits. `bit_depth` is the
/// stored depth (8 or 16); `channels` is 1 (gray) or 3 (RGB).
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;  // row-major, interleaved
};

/// Throws IngestionError on unreadable or malformed files. Palette and
/// low-bit images are expanded; alpha is dropped.
RawImage read(const std::string& path);

/// Writes 8- or 16-bit gray/RGB; `samples` must be interleaved.
void write(const std::string& path, std::size_t width, std::size_t height, int channels, int bit_depth,
           const std::vector<std::uint16_t>& samples);

/// Binary mask written as a 1-bit grayscale PNG.
void write_mask(const std::string& path, std::size_t width, std::size_t height, const std::vector<std::uint8_t>& mask);

// Tensor bridges. Values are quantized to the file's bit depth.
void write_rgb(const std::string& path, const Tensor& rgb);      // 3×H×W, 8-bit
void write_depth(const std::string& path, const Tensor& depth);  // 1×H×W, 16-bit
void write_mask(const std::string& path, const Tensor& mask);    // 1×H×W in {0,1}
Tensor read_rgb(const std::string& path);
Tensor read_depth(const std::string& path);
Tensor read_mask(const std::string& path);

}  // namespace ibiumad::png
