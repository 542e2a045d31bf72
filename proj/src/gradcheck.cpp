#include "ciisod/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ciisod/error.hpp"
#include "ciisod/rng.hpp"

namespace ciisod {

double GradcheckReport::max_error() const {
  double m = 0;
  for (const auto& t : tensors) m = std::max(m, t.error);
  return m;
}

std::size_t GradcheckReport::probed() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.probed;
  return n;
}

std::size_t GradcheckReport::skipped() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.skipped;
  return n;
}

namespace {

constexpr double kScaleFloor = 1e-7;

// Probe lists per input tensor.
std::vector<std::vector<std::size_t>> choose_probes(const std::vector<Parameter<double>>& inputs,
                                                    const GradcheckOptions& options, Rng& rng) {
  std::vector<std::vector<std::size_t>> probes(inputs.size());
  if (options.total_entries > 0) {
    for (std::size_t k = 0; k < options.total_entries; ++k) {
      const std::size_t t = rng.uniform_int(0, static_cast<int>(inputs.size()) - 1);
      const std::size_t i = rng.uniform_int(0, static_cast<int>(inputs[t].tensor.numel()) - 1);
      probes[t].push_back(i);
    }
    for (auto& p : probes) {
      std::sort(p.begin(), p.end());
      p.erase(std::unique(p.begin(), p.end()), p.end());
    }
    return probes;
  }
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& idx = probes[t];
    idx.resize(inputs[t].tensor.numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_entries > 0 && idx.size() > options.max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng.engine());
      idx.resize(options.max_entries);
    }
  }
  return probes;
}

}  // namespace

GradcheckReport gradcheck(const std::function<Tensor<double>()>& loss,
                          const std::vector<Parameter<double>>& inputs,
                          const GradcheckOptions& options) {
  if (options.steps.empty()) throw ConfigError("gradcheck needs at least one step");
  GradcheckReport report;
  for (const auto& p : inputs) {
    Tensor<double> t = p.tensor;
    t.zero_grad();
  }
  const Tensor<double> base = loss();
  if (!std::isfinite(base.item())) {
    report.diagnostic = "loss is not finite at the unperturbed point";
    return report;
  }
  base.backward();

  Rng rng(options.seed, "gradcheck");
  const auto probes = choose_probes(inputs, options, rng);
  report.passed = true;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto& p = inputs[t];
    Tensor<double> tensor = p.tensor;
    const std::vector<double> analytic(tensor.grad().begin(), tensor.grad().end());
    double scale = kScaleFloor;
    for (double a : analytic) scale = std::max(scale, std::abs(a));

    TensorCheck check{p.name, 0, probes[t].size(), 0, 0};
    double diff = 0;
    bool finite = true;
    for (std::size_t i : probes[t]) {
      double& v = tensor.data()[i];
      const double saved = v;
      std::vector<double> estimates;
      {
        NoGradGuard guard;
        for (double h : options.steps) {
          v = saved + h;
          const double plus = loss().item();
          v = saved - h;
          const double minus = loss().item();
          if (!std::isfinite(plus) || !std::isfinite(minus)) finite = false;
          estimates.push_back((plus - minus) / (2 * h));
        }
      }
      v = saved;
      if (!finite) {
        report.diagnostic = "non-finite loss while perturbing " + p.name + "[" +
                            std::to_string(i) + "]";
        break;
      }
      double numeric = estimates.front();
      if (estimates.size() > 1) {
        double best = INFINITY;
        for (std::size_t k = 0; k + 1 < estimates.size(); ++k) {
          const double gap = std::abs(estimates[k] - estimates[k + 1]);
          if (gap < best) {
            best = gap;
            numeric = estimates[k + 1];
          }
        }
        if (best > options.tolerance * std::max(scale, std::abs(numeric))) {
          ++check.skipped;
          continue;
        }
      }
      scale = std::max(scale, std::abs(numeric));
      diff = std::max(diff, std::abs(numeric - analytic[i]));
    }
    check.scale = scale;
    check.error = finite ? diff / scale : INFINITY;
    if (report.passed && (!finite || check.error > options.tolerance)) {
      report.passed = false;
      if (finite) {
        report.diagnostic = p.name + ": relative error " + std::to_string(check.error) +
                            " (gradient scale " + std::to_string(scale) + ")";
      }
    }
    report.tensors.push_back(check);
    if (!finite) break;
  }
  const std::size_t probed = report.probed();
  if (report.passed && probed > 0 &&
      static_cast<double>(report.skipped()) > options.max_skipped_fraction * probed) {
    report.passed = false;
    report.diagnostic = std::to_string(report.skipped()) + " of " + std::to_string(probed) +
                        " probes sit on non-smooth points";
  }
  return report;
}

}  // namespace ciisod
