#include "ciisod/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ciisod/error.hpp"
#include "ciisod/nn.hpp"

namespace ciisod {

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected image_path<TAB>mask_path");
    }
    entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& e : entries) out << e.image.generic_string() << '\t' << e.mask.generic_string() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
  const auto entries = read_manifest(dir / kManifestName);
  if (entries.empty()) throw FormatError("empty manifest in " + dir.string());
  std::vector<Sample> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries) {
    Sample s;
    s.image = read_ppm(dir / e.image);
    s.mask = read_mask(dir / e.mask);
    if (s.mask.height != s.image.height || s.mask.width != s.image.width) {
      throw FormatError("mask " + e.mask.string() + " does not match image size");
    }
    s.id = e.image.stem().string();
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

struct Color {
  double r, g, b;
};

enum class ShapeKind { Ellipse, Rectangle, Triangle };

struct Shape2D {
  ShapeKind kind;
  double cx, cy, rx, ry, angle;
  double tx[3], ty[3];  // triangle vertices

  bool contains(double x, double y) const {
    switch (kind) {
      case ShapeKind::Ellipse: {
        const double c = std::cos(angle), s = std::sin(angle);
        const double u = ((x - cx) * c + (y - cy) * s) / rx;
        const double v = (-(x - cx) * s + (y - cy) * c) / ry;
        return u * u + v * v <= 1.0;
      }
      case ShapeKind::Rectangle: {
        const double c = std::cos(angle), s = std::sin(angle);
        const double u = (x - cx) * c + (y - cy) * s;
        const double v = -(x - cx) * s + (y - cy) * c;
        return std::abs(u) <= rx && std::abs(v) <= ry;
      }
      case ShapeKind::Triangle: {
        auto edge = [&](int a, int b) {
          return (tx[b] - tx[a]) * (y - ty[a]) - (ty[b] - ty[a]) * (x - tx[a]);
        };
        const double d0 = edge(0, 1), d1 = edge(1, 2), d2 = edge(2, 0);
        const bool neg = d0 < 0 || d1 < 0 || d2 < 0;
        const bool pos = d0 > 0 || d1 > 0 || d2 > 0;
        return !(neg && pos);
      }
    }
    return false;
  }
};

Shape2D random_shape(Rng& rng, int size, double min_scale, double max_scale) {
  Shape2D s{};
  s.kind = static_cast<ShapeKind>(rng.uniform_int(0, 2));
  s.cx = rng.uniform(0.15, 0.85) * size;
  s.cy = rng.uniform(0.15, 0.85) * size;
  s.rx = rng.uniform(min_scale, max_scale) * size;
  s.ry = s.rx * rng.uniform(0.6, 1.4);
  s.angle = rng.uniform(0.0, 3.14159265358979);
  for (int k = 0; k < 3; ++k) {
    const double theta = s.angle + k * 2.0943951 + rng.uniform(-0.4, 0.4);
    const double r = s.rx * rng.uniform(0.9, 1.4);
    s.tx[k] = s.cx + r * std::cos(theta);
    s.ty[k] = s.cy + r * std::sin(theta);
  }
  return s;
}

double color_distance(const Color& a, const Color& b) {
  return std::sqrt((a.r - b.r) * (a.r - b.r) + (a.g - b.g) * (a.g - b.g) + (a.b - b.b) * (a.b - b.b));
}

// Smooth random field in roughly [-amp, amp]: a coarse grid bilinearly upsampled.
std::vector<float> low_frequency_field(Rng& rng, int size, int grid, double amp) {
  Tensor<float> coarse(Shape{1, 1, grid, grid});
  for (float& v : coarse.data()) v = static_cast<float>(rng.uniform(-amp, amp));
  NoGradGuard guard;
  Tensor<float> fine = bilinear_resize(coarse, size, size);
  return {fine.data().begin(), fine.data().end()};
}

}  // namespace

Sample synthesize_sample(int size, std::uint64_t seed, int index, const SyntheticOptions& options) {
  Rng rng(derive_seed(seed, "data"), "sample/" + std::to_string(index));
  Sample out;
  out.id = [&] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "syn_%05d", index);
    return std::string(buf);
  }();
  out.image = RgbImage(size, size);
  out.mask = GrayMap(size, size);

  // Muted background colour.
  const double gray = rng.uniform(0.3, 0.7);
  const Color base{gray + rng.uniform(-0.12, 0.12), gray + rng.uniform(-0.12, 0.12),
                   gray + rng.uniform(-0.12, 0.12)};
  std::vector<float> field[3];
  for (auto& f : field) f = low_frequency_field(rng, size, 5, 0.15);

  Color fg_color{};
  for (int tries = 0; tries < 1000; ++tries) {
    fg_color = {rng.uniform(), rng.uniform(), rng.uniform()};
    if (color_distance(fg_color, base) >= 0.45) break;
  }

  std::vector<Shape2D> distractors;
  const int n_distract = rng.uniform_int(2, 4);
  std::vector<Color> distract_colors;
  for (int i = 0; i < n_distract; ++i) {
    distractors.push_back(random_shape(rng, size, 0.05, 0.15));
    distract_colors.push_back({base.r + rng.uniform(-0.08, 0.08), base.g + rng.uniform(-0.08, 0.08),
                               base.b + rng.uniform(-0.08, 0.08)});
  }

  std::vector<Shape2D> salient;
  double fraction = 0;
  for (int tries = 0; tries < 200; ++tries) {
    salient.clear();
    const int n_fg = rng.uniform_int(1, 3);
    for (int i = 0; i < n_fg; ++i) salient.push_back(random_shape(rng, size, 0.1, 0.28));
    int inside = 0;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        for (const auto& s : salient) {
          if (s.contains(x + 0.5, y + 0.5)) {
            ++inside;
            break;
          }
        }
      }
    }
    fraction = static_cast<double>(inside) / (static_cast<double>(size) * size);
    if (fraction >= options.min_foreground && fraction <= options.max_foreground) break;
    salient.clear();
  }
  if (salient.empty()) {
    // Fallback: one centred ellipse covering about 20% of the image.
    Shape2D s{};
    s.kind = ShapeKind::Ellipse;
    s.cx = s.cy = size / 2.0;
    s.rx = s.ry = 0.25 * size;
    salient.push_back(s);
  }

  const double shade_x = rng.uniform(-0.1, 0.1), shade_y = rng.uniform(-0.1, 0.1);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * size + x;
      const double px = x + 0.5, py = y + 0.5;
      Color c{base.r + field[0][i], base.g + field[1][i], base.b + field[2][i]};
      for (std::size_t d = 0; d < distractors.size(); ++d) {
        if (distractors[d].contains(px, py)) {
          c = {distract_colors[d].r + field[0][i], distract_colors[d].g + field[1][i],
               distract_colors[d].b + field[2][i]};
        }
      }
      bool fg = false;
      for (const auto& s : salient) fg = fg || s.contains(px, py);
      if (fg) {
        const double shade = shade_x * (px / size - 0.5) + shade_y * (py / size - 0.5);
        c = {fg_color.r + shade, fg_color.g + shade, fg_color.b + shade};
      }
      const double grain = rng.uniform(-0.03, 0.03);
      out.image.at(0, y, x) = static_cast<float>(std::clamp(c.r + grain, 0.0, 1.0));
      out.image.at(1, y, x) = static_cast<float>(std::clamp(c.g + grain, 0.0, 1.0));
      out.image.at(2, y, x) = static_cast<float>(std::clamp(c.b + grain, 0.0, 1.0));
      out.mask.at(y, x) = fg ? 1.0f : 0.0f;
    }
  }
  return out;
}

std::vector<ManifestEntry> gen_synthetic(int count, int size, std::uint64_t seed,
                                         const std::filesystem::path& out_dir,
                                         const SyntheticOptions& options) {
  if (count < 1) throw ConfigError("gen_synthetic: count must be >= 1");
  if (size < 32 || size % 32 != 0) {
    throw ConfigError("gen_synthetic: size " + std::to_string(size) + " is not a positive multiple of 32");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "masks", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < count; ++i) {
    const Sample s = synthesize_sample(size, seed, i, options);
    ManifestEntry e{std::filesystem::path("images") / (s.id + ".ppm"),
                    std::filesystem::path("masks") / (s.id + ".pgm")};
    write_ppm(s.image, out_dir / e.image);
    write_pgm(s.mask, out_dir / e.mask);
    entries.push_back(std::move(e));
  }
  write_manifest(entries, out_dir / kManifestName);
  return entries;
}

RgbImage resize_image(const RgbImage& image, int height, int width) {
  NoGradGuard guard;
  Tensor<float> t(Shape{1, 3, image.height, image.width}, image.values);
  Tensor<float> r = bilinear_resize(t, height, width);
  RgbImage out(height, width);
  std::copy(r.data().begin(), r.data().end(), out.values.begin());
  return out;
}

GrayMap resize_map(const GrayMap& map, int height, int width) {
  NoGradGuard guard;
  Tensor<float> t(Shape{1, 1, map.height, map.width}, map.values);
  Tensor<float> r = bilinear_resize(t, height, width);
  GrayMap out(height, width);
  std::copy(r.data().begin(), r.data().end(), out.values.begin());
  return out;
}

GrayMap resize_mask_nearest(const GrayMap& mask, int height, int width) {
  GrayMap out(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height - 1, static_cast<int>((y + 0.5) * mask.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width - 1, static_cast<int>((x + 0.5) * mask.width / width));
      out.at(y, x) = mask.at(sy, sx) >= 0.5f ? 1.0f : 0.0f;
    }
  }
  return out;
}

Sample flip_horizontal(const Sample& sample) {
  Sample out = sample;
  const int h = sample.image.height, w = sample.image.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) out.image.at(c, y, x) = sample.image.at(c, y, w - 1 - x);
      out.mask.at(y, x) = sample.mask.at(y, w - 1 - x);
    }
  }
  return out;
}

Sample augment(const Sample& sample, Rng& rng, const AugmentOptions& options) {
  Sample out = rng.bernoulli(options.flip_probability) ? flip_horizontal(sample) : sample;
  const int h = sample.image.height, w = sample.image.width;
  const int ch = std::clamp(static_cast<int>(std::lround(rng.uniform(options.crop_min, options.crop_max) * h)), 1, h);
  const int cw = std::clamp(static_cast<int>(std::lround(rng.uniform(options.crop_min, options.crop_max) * w)), 1, w);
  const int y0 = rng.uniform_int(0, h - ch);
  const int x0 = rng.uniform_int(0, w - cw);
  if (ch == h && cw == w) return out;

  RgbImage crop(ch, cw);
  GrayMap crop_mask(ch, cw);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      for (int c = 0; c < 3; ++c) crop.at(c, y, x) = out.image.at(c, y0 + y, x0 + x);
      crop_mask.at(y, x) = out.mask.at(y0 + y, x0 + x);
    }
  }
  out.image = resize_image(crop, h, w);
  out.mask = resize_mask_nearest(crop_mask, h, w);
  return out;
}

GrayMap to_gray(const RgbImage& image) {
  GrayMap g(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      g.at(y, x) = (image.at(0, y, x) + image.at(1, y, x) + image.at(2, y, x)) / 3.0f;
    }
  }
  return g;
}

template <class T>
Tensor<T> image_tensor(const RgbImage& image) {
  return Tensor<T>(Shape{1, 3, image.height, image.width},
                   std::vector<T>(image.values.begin(), image.values.end()));
}

template <class T>
Batch<T> make_batch(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ContractError("make_batch: no samples");
  const int h = samples.front().image.height, w = samples.front().image.width;
  const int n = static_cast<int>(samples.size());
  std::vector<T> images, masks;
  images.reserve(static_cast<std::size_t>(n) * 3 * h * w);
  masks.reserve(static_cast<std::size_t>(n) * h * w);
  for (const auto& s : samples) {
    if (s.image.height != h || s.image.width != w) {
      throw DimensionError("make_batch: mixed image sizes in one batch");
    }
    images.insert(images.end(), s.image.values.begin(), s.image.values.end());
    masks.insert(masks.end(), s.mask.values.begin(), s.mask.values.end());
  }
  return {Tensor<T>(Shape{n, 3, h, w}, std::move(images)), Tensor<T>(Shape{n, 1, h, w}, std::move(masks))};
}

template <class T>
GrayMap map_from_tensor(const Tensor<T>& t, int n) {
  const Shape& s = t.shape();
  GrayMap m(s.h, s.w);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) m.at(y, x) = static_cast<float>(t.at(n, 0, y, x));
  }
  return m;
}

template Tensor<float> image_tensor(const RgbImage&);
template Tensor<double> image_tensor(const RgbImage&);
template Batch<float> make_batch(const std::vector<Sample>&);
template Batch<double> make_batch(const std::vector<Sample>&);
template GrayMap map_from_tensor(const Tensor<float>&, int);
template GrayMap map_from_tensor(const Tensor<double>&, int);

}  // namespace ciisod
