#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ciisod/image.hpp"
#include "ciisod/rng.hpp"
#include "ciisod/tensor.hpp"

namespace ciisod {

struct Sample {
  RgbImage image;  // (3, H, W) in [0, 1]
  GrayMap mask;    // binary {0, 1}
  std::string id;
};

struct ManifestEntry {
  std::filesystem::path image;  // relative to the manifest directory
  std::filesystem::path mask;
};

inline constexpr const char* kManifestName = "manifest.txt";

/// One `image_path<TAB>mask_path` line per sample.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

/// Loads every sample listed in `dir`/manifest.txt.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

struct SyntheticOptions {
  double min_foreground = 0.05;
  double max_foreground = 0.6;
};

/// Renders one synthetic sample: low-frequency textured background with
/// low-contrast distractor shapes, plus 1-3 salient shapes (ellipse,
/// rectangle, triangle) in a distinct colour. Deterministic in (seed, index).
Sample synthesize_sample(int size, std::uint64_t seed, int index,
                         const SyntheticOptions& options = {});

/// Writes `count` samples under out_dir/images, out_dir/masks plus the
/// manifest, and returns the manifest entries.
std::vector<ManifestEntry> gen_synthetic(int count, int size, std::uint64_t seed,
                                         const std::filesystem::path& out_dir,
                                         const SyntheticOptions& options = {});

struct AugmentOptions {
  double flip_probability = 0.5;
  double crop_min = 0.85;
  double crop_max = 1.0;
};

/// Random horizontal flip and random crop (per-side scale in
/// [crop_min, crop_max]) resized back to the original size: bilinear for the
/// image, nearest plus re-binarization for the mask.
Sample augment(const Sample& sample, Rng& rng, const AugmentOptions& options = {});

Sample flip_horizontal(const Sample& sample);
RgbImage resize_image(const RgbImage& image, int height, int width);
GrayMap resize_map(const GrayMap& map, int height, int width);
GrayMap resize_mask_nearest(const GrayMap& mask, int height, int width);

/// Mean over RGB channels.
GrayMap to_gray(const RgbImage& image);

template <class T>
Tensor<T> image_tensor(const RgbImage& image);

template <class T>
struct Batch {
  Tensor<T> images;  // (n, 3, H, W)
  Tensor<T> masks;   // (n, 1, H, W)
};

template <class T>
Batch<T> make_batch(const std::vector<Sample>& samples);

/// Channel 0 of batch item `n` as a map.
template <class T>
GrayMap map_from_tensor(const Tensor<T>& t, int n = 0);

}  // namespace ciisod
