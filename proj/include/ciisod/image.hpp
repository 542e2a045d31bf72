#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ciisod {

/// Single-channel map with values in [0, 1], row-major.
struct GrayMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  GrayMap() = default;
  GrayMap(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
};

/// Planar RGB image (3, H, W) with values in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  RgbImage() = default;
  RgbImage(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(3 * static_cast<std::size_t>(h) * w, fill) {}

  float& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Binary NetPBM with maxval 255 only: P6 for RGB, P5 for grayscale.
// Parse failures throw FormatError naming the byte offset; open/write failures IoError.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);
GrayMap read_pgm(const std::filesystem::path& path);
/// Quantizes round(v * 255) after clamping to [0, 1].
void write_pgm(const GrayMap& map, const std::filesystem::path& path);
/// Reads a P5 mask and binarizes it: byte >= 128 -> 1, else 0.
GrayMap read_mask(const std::filesystem::path& path);

std::uint8_t quantize(float v);

}  // namespace ciisod
