#include "ciisod/interp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "ciisod/error.hpp"
#include "ciisod/nn.hpp"

namespace ciisod {

namespace {

GrayMap resample(const GrayMap& map, int h, int w) {
  Tensor<double> t(Shape{1, 1, map.height, map.width},
                   std::vector<double>(map.values.begin(), map.values.end()));
  NoGradGuard guard;
  const Tensor<double> r = bilinear_resize(t, h, w);
  GrayMap out(h, w);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = static_cast<float>(r.data()[i]);
  return out;
}

GrayMap abs_diff(const GrayMap& a, const GrayMap& b, double& norm) {
  GrayMap d(a.height, a.width);
  double sq = 0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const double v = std::abs(static_cast<double>(a.values[i]) - b.values[i]);
    d.values[i] = static_cast<float>(v);
    sq += v * v;
  }
  norm = std::sqrt(sq);
  return d;
}

GrayMap scaled(const GrayMap& m, double peak) {
  GrayMap out = m;
  if (peak <= 0) return out;
  for (float& v : out.values) v = static_cast<float>(v / peak);
  return out;
}

}  // namespace

InterpDemo interp_demo(const GrayMap& source, int rate) {
  if (rate < 2) throw ConfigError("interpolation rate must be >= 2");
  const int h = source.height, w = source.width;
  if (h / rate < 1 || w / rate < 1) {
    throw DimensionError("image " + std::to_string(h) + "x" + std::to_string(w) +
                         " is too small for rate " + std::to_string(rate));
  }
  InterpDemo d;
  d.rate = rate;
  d.source = source;
  d.up_down = resample(resample(source, h * rate, w * rate), h, w);
  d.down_up = resample(resample(source, h / rate, w / rate), h, w);
  d.diff_up_down = abs_diff(source, d.up_down, d.norm_up_down);
  d.diff_down_up = abs_diff(source, d.down_up, d.norm_down_up);
  return d;
}

void write_interp_demo(const InterpDemo& demo, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_pgm(demo.up_down, dir / "up_down.pgm");
  write_pgm(demo.down_up, dir / "down_up.pgm");
  float peak = 0;
  for (float v : demo.diff_up_down.values) peak = std::max(peak, v);
  for (float v : demo.diff_down_up.values) peak = std::max(peak, v);
  write_pgm(scaled(demo.diff_up_down, peak), dir / "diff_up_down.pgm");
  write_pgm(scaled(demo.diff_down_up, peak), dir / "diff_down_up.pgm");
  std::ofstream out(dir / "summary.txt");
  if (!out) throw IoError("cannot write " + (dir / "summary.txt").string());
  out << std::setprecision(9) << "rate " << demo.rate << "\n"
      << "l2_up_down " << demo.norm_up_down << "\n"
      << "l2_down_up " << demo.norm_down_up << "\n";
}

}  // namespace ciisod
