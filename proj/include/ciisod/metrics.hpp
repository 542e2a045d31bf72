#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ciisod/image.hpp"

namespace ciisod {

inline constexpr int kThresholdCount = 256;
inline constexpr double kBetaSquared = 0.3;
inline constexpr double kMetricEps = 1e-8;

struct PrPoint {
  double precision = 0;
  double recall = 0;
};

/// Threshold k/255 (k = 0..255) counts a pixel positive when pred >= k/255.
struct PrCurve {
  std::array<PrPoint, kThresholdCount> points{};
  bool degenerate = false;  // ground truth has no foreground
};

struct FMeasure {
  double max = 0;
  double mean = 0;
};

PrCurve pr_curve(const GrayMap& pred, const GrayMap& gt);

/// (1 + b^2) P R / (b^2 P + R + eps) with b^2 = 0.3.
double f_beta(double precision, double recall);
/// Max and mean of F-beta over the curve's 256 thresholds.
FMeasure f_measure(const PrCurve& curve);
FMeasure f_measure(const GrayMap& pred, const GrayMap& gt);

/// Structure measure 0.5 * S_object + 0.5 * S_region, with the degenerate
/// rules for all-background / all-foreground ground truth. Clamped to [0, 1].
double s_measure(const GrayMap& pred, const GrayMap& gt);

double mae(const GrayMap& pred, const GrayMap& gt);

enum class PrAggregation {
  PerImage,  // average per-image P and R at each threshold
  Pooled,    // sum TP/FP/FN over the dataset, then divide
};

struct MetricsReport {
  double f_beta_max = 0;
  double f_beta_mean = 0;
  double s_alpha = 0;
  double mae = 0;
  std::vector<PrPoint> pr_curve;
  std::size_t image_count = 0;
  // Images whose ground truth has no foreground; excluded from PR / F-beta.
  std::size_t degenerate_count = 0;
};

/// Dataset-level metric accumulation. Results do not depend on the order in
/// which images are added beyond floating-point summation order.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(PrAggregation aggregation = PrAggregation::PerImage)
      : aggregation_(aggregation) {}

  void add(const GrayMap& pred, const GrayMap& gt);
  /// Throws ContractError when no image was added.
  MetricsReport finish() const;

 private:
  PrAggregation aggregation_;
  std::size_t images_ = 0;
  std::size_t degenerate_ = 0;
  double mae_sum_ = 0;
  double s_sum_ = 0;
  std::array<double, kThresholdCount> precision_sum_{};
  std::array<double, kThresholdCount> recall_sum_{};
  std::array<double, kThresholdCount> tp_{}, fp_{}, fn_{};
};

std::string report_to_json(const MetricsReport& report);
void write_report_json(const MetricsReport& report, const std::filesystem::path& path);
/// CSV with header `threshold,precision,recall`.
void write_pr_csv(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace ciisod
