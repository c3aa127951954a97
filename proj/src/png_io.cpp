#include "ibiumad/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "ibiumad/errors.hpp"

namespace ibiumad::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint16_t quantize(double v, double levels) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * levels));
}

// libpng reports errors by longjmp; all C++ state lives in the caller's
// frame so no destructor is skipped.
bool decode(std::FILE* fp, RawImage& img, std::vector<png_byte>& buffer, std::string& err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    err = "out of memory";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "malformed PNG";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.assign(rowbytes * img.height, 0);
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode(std::FILE* fp, std::size_t width, std::size_t height, int color, int bit_depth,
            std::vector<png_bytep>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_rows(const std::string& path, std::size_t width, std::size_t height, int color, int bit_depth,
                std::vector<png_byte>& bytes, std::size_t rowbytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = bytes.data() + y * rowbytes;
  if (!encode(fp.get(), width, height, color, bit_depth, rows)) throw std::runtime_error("failed to encode " + path);
}

}  // namespace

RawImage read(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IngestionError("cannot open " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IngestionError(path + " is not a PNG file");
  std::rewind(fp.get());
  RawImage img;
  std::vector<png_byte> buffer;
  std::string err;
  if (!decode(fp.get(), img, buffer, err)) throw IngestionError(path + ": " + err);
  const std::size_t n = img.width * img.height * static_cast<std::size_t>(img.channels);
  img.samples.resize(n);
  if (img.bit_depth == 16)
    for (std::size_t i = 0; i < n; ++i)
      img.samples[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
  else
    for (std::size_t i = 0; i < n; ++i) img.samples[i] = buffer[i];
  return img;
}

void write(const std::string& path, std::size_t width, std::size_t height, int channels, int bit_depth,
           const std::vector<std::uint16_t>& samples) {
  if (channels != 1 && channels != 3) throw ParameterError("png::write: channels must be 1 or 3");
  if (bit_depth != 8 && bit_depth != 16) throw ParameterError("png::write: bit depth must be 8 or 16");
  const std::size_t n = width * height * static_cast<std::size_t>(channels);
  if (samples.size() != n) throw DimensionError("png::write: sample count does not match geometry");
  const std::size_t bytes_per = bit_depth / 8;
  std::vector<png_byte> bytes(n * bytes_per);
  for (std::size_t i = 0; i < n; ++i) {
    if (bit_depth == 16) {
      bytes[2 * i] = static_cast<png_byte>(samples[i] >> 8);
      bytes[2 * i + 1] = static_cast<png_byte>(samples[i] & 0xff);
    } else {
      bytes[i] = static_cast<png_byte>(std::min<std::uint16_t>(samples[i], 255));
    }
  }
  write_rows(path, width, height, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, bit_depth, bytes,
             width * channels * bytes_per);
}

void write_mask(const std::string& path, std::size_t width, std::size_t height, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != width * height) throw DimensionError("png::write_mask: size mismatch");
  const std::size_t rowbytes = (width + 7) / 8;
  std::vector<png_byte> bytes(rowbytes * height, 0);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      if (mask[y * width + x]) bytes[y * rowbytes + x / 8] |= static_cast<png_byte>(0x80 >> (x % 8));
  write_rows(path, width, height, PNG_COLOR_TYPE_GRAY, 1, bytes, rowbytes);
}

void write_rgb(const std::string& path, const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw DimensionError("write_rgb expects 3×H×W");
  const std::size_t h = rgb.dim(1), w = rgb.dim(2);
  std::vector<std::uint16_t> s(3 * h * w);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < h * w; ++i) s[i * 3 + c] = quantize(rgb.data()[c * h * w + i], 255.0);
  write(path, w, h, 3, 8, s);
}

void write_depth(const std::string& path, const Tensor& depth) {
  if (depth.rank() != 3 || depth.dim(0) != 1) throw DimensionError("write_depth expects 1×H×W");
  std::vector<std::uint16_t> s(depth.numel());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = quantize(depth.data()[i], 65535.0);
  write(path, depth.dim(2), depth.dim(1), 1, 16, s);
}

void write_mask(const std::string& path, const Tensor& mask) {
  if (mask.rank() != 3 || mask.dim(0) != 1) throw DimensionError("write_mask expects 1×H×W");
  std::vector<std::uint8_t> m(mask.numel());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = mask.data()[i] > 0.5 ? 1 : 0;
  write_mask(path, mask.dim(2), mask.dim(1), m);
}

Tensor read_rgb(const std::string& path) {
  const RawImage img = read(path);
  const std::size_t hw = img.width * img.height;
  const double scale = img.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<double> v(3 * hw);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < hw; ++i)
      v[c * hw + i] = img.samples[i * img.channels + (img.channels == 3 ? c : 0)] / scale;
  return Tensor::from({3, img.height, img.width}, std::move(v));
}

Tensor read_depth(const std::string& path) {
  const RawImage img = read(path);
  if (img.channels != 1) throw IngestionError(path + ": depth map must be single-channel");
  const double scale = img.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<double> v(img.samples.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.samples[i] / scale;
  return Tensor::from({1, img.height, img.width}, std::move(v));
}

Tensor read_mask(const std::string& path) {
  const RawImage img = read(path);
  const std::size_t hw = img.width * img.height;
  std::vector<double> v(hw);
  for (std::size_t i = 0; i < hw; ++i) v[i] = img.samples[i * img.channels] > 0 ? 1.0 : 0.0;
  return Tensor::from({1, img.height, img.width}, std::move(v));
}

}  // namespace ibiumad::png
