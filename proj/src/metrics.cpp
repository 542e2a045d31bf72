#include "ciisod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ciisod/error.hpp"

namespace ciisod {

namespace {

void check_same(const GrayMap& a, const GrayMap& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError(std::string(what) + ": prediction " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs ground truth " +
                         std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

bool is_fg(float v) { return v > 0.5f; }

struct Counts {
  std::array<double, kThresholdCount> tp{}, fp{}, fn{};
  std::size_t foreground = 0;
};

// Histogram of predictions per quantized level; a pixel with value p is
// positive at threshold k/255 iff p >= k/255.
Counts threshold_counts(const GrayMap& pred, const GrayMap& gt) {
  std::array<double, kThresholdCount + 1> fg_at{}, bg_at{};
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred.values[i];
    // Largest k with k/255 <= p, computed exactly by checking the neighbours.
    int k = static_cast<int>(std::floor(p * 255.0));
    k = std::clamp(k, -1, kThresholdCount - 1);
    while (k + 1 < kThresholdCount && p >= (k + 1) / 255.0) ++k;
    while (k >= 0 && p < k / 255.0) --k;
    if (is_fg(gt.values[i])) {
      ++c.foreground;
      if (k >= 0) fg_at[k] += 1;
    } else if (k >= 0) {
      bg_at[k] += 1;
    }
  }
  double fg_pos = 0, bg_pos = 0;
  for (int k = kThresholdCount - 1; k >= 0; --k) {
    fg_pos += fg_at[k];
    bg_pos += bg_at[k];
    c.tp[k] = fg_pos;
    c.fp[k] = bg_pos;
    c.fn[k] = static_cast<double>(c.foreground) - fg_pos;
  }
  return c;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Object similarity of the values inside one region.
double object_score(const std::vector<double>& values) {
  if (values.empty()) return 0;
  const double x = mean_of(values);
  double sq = 0;
  for (double v : values) sq += (v - x) * (v - x);
  const double sigma = values.size() > 1 ? std::sqrt(sq / (values.size() - 1)) : 0.0;
  return 2.0 * x / (x * x + 1.0 + sigma + std::numeric_limits<double>::epsilon());
}

double s_object(const GrayMap& pred, const GrayMap& gt, double fg_fraction) {
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (is_fg(gt.values[i])) {
      fg.push_back(pred.values[i]);
    } else {
      bg.push_back(1.0 - pred.values[i]);
    }
  }
  return fg_fraction * object_score(fg) + (1 - fg_fraction) * object_score(bg);
}

// SSIM-style similarity of one block [y0, y1) x [x0, x1).
double block_ssim(const GrayMap& pred, const GrayMap& gt, int y0, int y1, int x0, int x1) {
  const double n = static_cast<double>(y1 - y0) * (x1 - x0);
  const double eps = std::numeric_limits<double>::epsilon();
  double sx = 0, sy = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      sx += pred.at(y, x);
      sy += is_fg(gt.at(y, x)) ? 1.0 : 0.0;
    }
  }
  const double mx = sx / n, my = sy / n;
  double vxx = 0, vyy = 0, vxy = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double dx = pred.at(y, x) - mx;
      const double dy = (is_fg(gt.at(y, x)) ? 1.0 : 0.0) - my;
      vxx += dx * dx;
      vyy += dy * dy;
      vxy += dx * dy;
    }
  }
  vxx /= n - 1 + eps;
  vyy /= n - 1 + eps;
  vxy /= n - 1 + eps;
  const double alpha = 4 * mx * my * vxy;
  const double beta = (mx * mx + my * my) * (vxx + vyy);
  if (alpha != 0) return alpha / (beta + eps);
  return beta == 0 ? 1.0 : 0.0;
}

double s_region(const GrayMap& pred, const GrayMap& gt) {
  const int h = gt.height, w = gt.width;
  double total = 0, col_moment = 0, row_moment = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!is_fg(gt.at(y, x))) continue;
      total += 1;
      col_moment += x + 1;
      row_moment += y + 1;
    }
  }
  // 1-based centroid; the split puts rows [0, cy) and columns [0, cx) in the top-left block.
  const int cx = static_cast<int>(std::lround(col_moment / total));
  const int cy = static_cast<int>(std::lround(row_moment / total));
  const double area = static_cast<double>(h) * w;
  const double w1 = static_cast<double>(cx) * cy / area;
  const double w2 = static_cast<double>(w - cx) * cy / area;
  const double w3 = static_cast<double>(cx) * (h - cy) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  auto score = [&](double weight, int y0, int y1, int x0, int x1) {
    if (y1 <= y0 || x1 <= x0) return 0.0;
    return weight * block_ssim(pred, gt, y0, y1, x0, x1);
  };
  return score(w1, 0, cy, 0, cx) + score(w2, 0, cy, cx, w) + score(w3, cy, h, 0, cx) +
         score(w4, cy, h, cx, w);
}

}  // namespace

PrCurve pr_curve(const GrayMap& pred, const GrayMap& gt) {
  check_same(pred, gt, "pr_curve");
  const Counts c = threshold_counts(pred, gt);
  PrCurve curve;
  curve.degenerate = c.foreground == 0;
  for (int k = 0; k < kThresholdCount; ++k) {
    curve.points[k].precision = c.tp[k] / (c.tp[k] + c.fp[k] + kMetricEps);
    curve.points[k].recall = c.tp[k] / (c.tp[k] + c.fn[k] + kMetricEps);
  }
  return curve;
}

double f_beta(double precision, double recall) {
  return (1 + kBetaSquared) * precision * recall /
         (kBetaSquared * precision + recall + kMetricEps);
}

FMeasure f_measure(const PrCurve& curve) {
  FMeasure f{0, 0};
  for (const auto& p : curve.points) {
    const double v = f_beta(p.precision, p.recall);
    f.max = std::max(f.max, v);
    f.mean += v;
  }
  f.mean /= kThresholdCount;
  return f;
}

FMeasure f_measure(const GrayMap& pred, const GrayMap& gt) {
  return f_measure(pr_curve(pred, gt));
}

double s_measure(const GrayMap& pred, const GrayMap& gt) {
  check_same(pred, gt, "s_measure");
  double fg = 0, pred_mean = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    fg += is_fg(gt.values[i]) ? 1.0 : 0.0;
    pred_mean += pred.values[i];
  }
  const double n = static_cast<double>(gt.size());
  const double fg_fraction = fg / n;
  pred_mean /= n;
  if (fg == 0) return 1.0 - pred_mean;
  if (fg == n) return pred_mean;
  const double q = 0.5 * s_object(pred, gt, fg_fraction) + 0.5 * s_region(pred, gt);
  return std::clamp(q, 0.0, 1.0);
}

double mae(const GrayMap& pred, const GrayMap& gt) {
  check_same(pred, gt, "mae");
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += std::abs(static_cast<double>(pred.values[i]) - gt.values[i]);
  }
  return acc / static_cast<double>(pred.size());
}

void MetricsAccumulator::add(const GrayMap& pred, const GrayMap& gt) {
  check_same(pred, gt, "metrics");
  ++images_;
  mae_sum_ += mae(pred, gt);
  s_sum_ += s_measure(pred, gt);
  const Counts c = threshold_counts(pred, gt);
  if (c.foreground == 0) {
    ++degenerate_;
    return;
  }
  for (int k = 0; k < kThresholdCount; ++k) {
    precision_sum_[k] += c.tp[k] / (c.tp[k] + c.fp[k] + kMetricEps);
    recall_sum_[k] += c.tp[k] / (c.tp[k] + c.fn[k] + kMetricEps);
    tp_[k] += c.tp[k];
    fp_[k] += c.fp[k];
    fn_[k] += c.fn[k];
  }
}

MetricsReport MetricsAccumulator::finish() const {
  if (images_ == 0) throw ContractError("metrics over an empty dataset");
  MetricsReport r;
  r.image_count = images_;
  r.degenerate_count = degenerate_;
  r.mae = mae_sum_ / images_;
  r.s_alpha = s_sum_ / images_;
  const std::size_t scored = images_ - degenerate_;
  r.pr_curve.resize(kThresholdCount);
  if (scored == 0) return r;
  PrCurve curve;
  for (int k = 0; k < kThresholdCount; ++k) {
    PrPoint p;
    if (aggregation_ == PrAggregation::PerImage) {
      p.precision = precision_sum_[k] / scored;
      p.recall = recall_sum_[k] / scored;
    } else {
      p.precision = tp_[k] / (tp_[k] + fp_[k] + kMetricEps);
      p.recall = tp_[k] / (tp_[k] + fn_[k] + kMetricEps);
    }
    r.pr_curve[k] = p;
    curve.points[k] = p;
  }
  const FMeasure f = f_measure(curve);
  r.f_beta_max = f.max;
  r.f_beta_mean = f.mean;
  return r;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["f_beta_max"] = report.f_beta_max;
  j["f_beta_mean"] = report.f_beta_mean;
  j["s_alpha"] = report.s_alpha;
  j["mae"] = report.mae;
  j["image_count"] = report.image_count;
  j["degenerate_count"] = report.degenerate_count;
  j["beta_squared"] = kBetaSquared;
  nlohmann::json curve = nlohmann::json::array();
  for (std::size_t k = 0; k < report.pr_curve.size(); ++k) {
    curve.push_back({{"threshold", static_cast<double>(k) / 255.0},
                     {"precision", report.pr_curve[k].precision},
                     {"recall", report.pr_curve[k].recall}});
  }
  j["pr_curve"] = curve;
  return j.dump(2);
}

void write_report_json(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << report_to_json(report) << "\n";
}

void write_pr_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "threshold,precision,recall\n" << std::setprecision(9);
  for (std::size_t k = 0; k < report.pr_curve.size(); ++k) {
    out << static_cast<double>(k) / 255.0 << "," << report.pr_curve[k].precision << ","
        << report.pr_curve[k].recall << "\n";
  }
}

}  // namespace ciisod
