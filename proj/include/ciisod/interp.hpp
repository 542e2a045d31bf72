#pragma once

#include <filesystem>

#include "ciisod/image.hpp"

namespace ciisod {

struct InterpDemo {
  int rate = 2;
  GrayMap source;
  GrayMap up_down;    // up-sampled by `rate`, then back down
  GrayMap down_up;    // down-sampled by `rate`, then back up
  GrayMap diff_up_down;
  GrayMap diff_down_up;
  double norm_up_down = 0;  // L2 norm of the difference map
  double norm_down_up = 0;
};

/// Round trip of a map through bilinear resampling in both orders.
InterpDemo interp_demo(const GrayMap& source, int rate);

/// Writes the two round-trip maps, the two difference maps (scaled by their
/// common maximum) and `summary.txt` with both norms.
void write_interp_demo(const InterpDemo& demo, const std::filesystem::path& dir);

}  // namespace ciisod
