#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ciisod/tensor.hpp"

namespace ciisod {

struct GradcheckOptions {
  // Central-difference steps. With several steps each probe uses the
  // estimate of the best-agreeing pair of consecutive steps; a probe where
  // no pair agrees to `tolerance` straddles a ReLU/max switch and is skipped.
  std::vector<double> steps{1e-4};
  double tolerance = 1e-4;
  // Entries probed per tensor; 0 checks every entry.
  std::size_t max_entries = 0;
  // When > 0, probe this many entries drawn across all tensors instead.
  std::size_t total_entries = 0;
  // Fail when more than this fraction of probes had to be skipped.
  double max_skipped_fraction = 0.25;
  std::uint64_t seed = 0;  // picks the probed entries
};

struct TensorCheck {
  std::string name;
  // max |analytic - numeric| over the probes divided by
  // max(max |analytic| over the tensor, max |numeric|, 1e-7).
  double error = 0;
  std::size_t probed = 0;
  std::size_t skipped = 0;
  double scale = 0;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  bool passed = false;
  std::string diagnostic;  // first failure, or empty

  double max_error() const;
  std::size_t probed() const;
  std::size_t skipped() const;
};

/// Central finite differences against reverse mode. `loss` must rebuild the
/// scalar from the current values of `inputs` each time it is called.
GradcheckReport gradcheck(const std::function<Tensor<double>()>& loss,
                          const std::vector<Parameter<double>>& inputs,
                          const GradcheckOptions& options = {});

}  // namespace ciisod
