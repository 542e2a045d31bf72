#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ciisod/gradcheck.hpp"

namespace ciisod {

struct GradcheckCase {
  std::string module;
  std::string name;
  std::uint64_t seed = 0;
  GradcheckReport report;
};

/// Modules covered by run_gradcheck_suite, in run order.
std::vector<std::string> gradcheck_modules();

/// Finite-difference checks of every differentiable op, the interactor
/// blocks, the decoder and an end-to-end reduced model, each on `seeds`
/// random draws starting at `base_seed`. An empty `module` runs all of them;
/// an unknown one raises ConfigError.
std::vector<GradcheckCase> run_gradcheck_suite(const std::string& module, int seeds,
                                               std::uint64_t base_seed = 1);

}  // namespace ciisod
