#include <gtest/gtest.h>

#include <cfloat>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ciisod/gradcheck.hpp"
#include "ciisod/loss.hpp"
#include "ciisod/metrics.hpp"
#include "sref.hpp"
#include "test_util.hpp"

using namespace ciisod;
using ciisod::testing::random_tensor;
namespace sref = ciisod::testing::sref;
using ciisod::testing::random_mask;
using ciisod::testing::random_pred;

namespace {

Tensor<double> filled(int h, int w, double v) { return Tensor<double>(Shape{1, 1, h, w}, v); }

GrayMap map_of(int h, int w, std::vector<float> v) {
  GrayMap m(h, w);
  m.values = std::move(v);
  return m;
}

GrayMap centered_square(int size, int side) {
  GrayMap m(size, size);
  const int lo = (size - side) / 2;
  for (int y = lo; y < lo + side; ++y)
    for (int x = lo; x < lo + side; ++x) m.at(y, x) = 1;
  return m;
}

GrayMap invert(const GrayMap& m) {
  GrayMap r = m;
  for (float& v : r.values) v = 1 - v;
  return r;
}



}  // namespace

TEST(Bce, Examples) {
  EXPECT_NEAR(bce_loss(filled(4, 4, 0.5), filled(4, 4, 1.0)).item(), 0.693147, 1e-6);
  EXPECT_NEAR(bce_loss(filled(4, 4, 0.5), filled(4, 4, 0.0)).item(), 0.693147, 1e-6);
  EXPECT_NEAR(bce_loss(filled(1, 1, 0.25), filled(1, 1, 1.0)).item(), 1.386294, 1e-6);
  Tensor<double> y(Shape{1, 1, 2, 2}, {0, 1, 1, 0});
  const double same = bce_loss(y, y).item();
  EXPECT_GE(same, 0.0);
  EXPECT_LE(same, 2e-7);
}

TEST(Iou, Examples) {
  Tensor<double> y(Shape{1, 1, 2, 2}, {0, 1, 1, 0});
  EXPECT_NEAR(iou_loss(y, y).item(), 0.0, 1e-8);
  EXPECT_NEAR(iou_loss(filled(4, 4, 0.5), filled(4, 4, 1.0)).item(), 0.5, 1e-9);
  Tensor<double> x(Shape{1, 1, 2, 2}, {1, 0, 0, 1});
  EXPECT_NEAR(iou_loss(x, y).item(), 1.0, 1e-8);
}

TEST(TotalLoss, Examples) {
  Tensor<double> y(Shape{1, 1, 2, 2}, {0, 1, 1, 0});
  EXPECT_NEAR(total_loss(y, y).item(), 0.0, 2e-7);
  EXPECT_NEAR(total_loss(filled(4, 4, 0.5), filled(4, 4, 1.0)).item(), 1.193147, 1e-6);
}

TEST(TotalLoss, Gradcheck) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor<double> x = random_tensor(Shape{2, 1, 5, 5}, rng, 0.05, 0.95, true);
    Tensor<double> y(Shape{2, 1, 5, 5});
    for (double& v : y.data()) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
    auto report = gradcheck([&] { return total_loss(x, y); }, {{x, "pred"}},
                            GradcheckOptions{{1e-5}, 1e-5});
    EXPECT_TRUE(report.passed) << report.diagnostic;
    EXPECT_LT(report.max_error(), 1e-5);
  }
}

TEST(Losses, BoundedAndMonotoneTowardTarget) {
  Rng rng(7);
  const auto start = random_tensor(Shape{2, 1, 6, 6}, rng, 0.01, 0.99);
  Tensor<double> y(Shape{2, 1, 6, 6});
  for (double& v : y.data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  double prev_bce = INFINITY, prev_iou = INFINITY;
  for (int k = 0; k <= 20; ++k) {
    const double t = k / 20.0 * 0.999;
    Tensor<double> x(start.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = (1 - t) * start.data()[i] + t * y.data()[i];
    const double b = bce_loss(x, y).item(), u = iou_loss(x, y).item();
    EXPECT_GE(b, 0.0);
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0);
    EXPECT_LT(b, prev_bce);
    EXPECT_LT(u, prev_iou);
    prev_bce = b;
    prev_iou = u;
  }
}

TEST(Losses, ShapeMismatchIsRejected) {
  EXPECT_THROW(bce_loss(filled(2, 2, 0.5), filled(3, 3, 1.0)), DimensionError);
  EXPECT_THROW(iou_loss(filled(2, 2, 0.5), filled(3, 3, 1.0)), DimensionError);
}

TEST(PrCurve, PerfectPrediction) {
  const GrayMap gt = centered_square(8, 4);
  const PrCurve c = pr_curve(gt, gt);
  EXPECT_FALSE(c.degenerate);
  for (int k = 1; k < kThresholdCount; ++k) {
    EXPECT_NEAR(c.points[k].precision, 1.0, 1e-8);
    EXPECT_NEAR(c.points[k].recall, 1.0, 1e-8);
  }
}

TEST(PrCurve, InvertedPrediction) {
  const GrayMap gt = centered_square(8, 4);
  const PrCurve c = pr_curve(invert(gt), gt);
  for (int k = 1; k < kThresholdCount; ++k) EXPECT_NEAR(c.points[k].precision, 0.0, 1e-8);
}

TEST(PrCurve, HandCountedCase) {
  // 3 TP, 1 FP, 1 FN, 11 TN at t = 0.5
  GrayMap gt(4, 4), pred(4, 4, 0.2f);
  for (int i : {0, 1, 2, 3}) gt.values[i] = 1;
  for (int i : {0, 1, 2}) pred.values[i] = 0.9f;
  pred.values[3] = 0.1f;
  pred.values[5] = 0.8f;
  const PrCurve c = pr_curve(pred, gt);
  EXPECT_NEAR(c.points[128].precision, 0.75, 1e-8);
  EXPECT_NEAR(c.points[128].recall, 0.75, 1e-8);
}

TEST(PrCurve, RecallNonIncreasingOnRandomPairs) {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const GrayMap gt = random_mask(16, 12, rng);
    const PrCurve c = pr_curve(random_pred(gt, rng), gt);
    for (int k = 1; k < kThresholdCount; ++k) EXPECT_LE(c.points[k].recall, c.points[k - 1].recall);
  }
}

TEST(FBeta, Examples) {
  EXPECT_NEAR(f_beta(1, 1), 1.0, 1e-7);
  EXPECT_NEAR(f_beta(0.5, 0.5), 0.5, 1e-7);
  EXPECT_NEAR(f_beta(1, 0.5), 0.8125, 1e-7);
  EXPECT_NEAR(f_beta(0, 0), 0.0, 1e-12);
}

TEST(FBeta, MaxAtLeastMean) {
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const GrayMap gt = random_mask(10, 14, rng);
    const FMeasure f = f_measure(random_pred(gt, rng), gt);
    EXPECT_GE(f.max, f.mean);
  }
}

TEST(SMeasure, MatchesDefinitionOracleOnRandomPairs) {
  Rng rng(10);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const GrayMap gt = random_mask(rng.uniform_int(5, 30), rng.uniform_int(5, 30), rng);
    const GrayMap pred = random_pred(gt, rng);
    worst = std::max(worst, std::abs(s_measure(pred, gt) - sref::s_measure(pred, gt)));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(SMeasure, SelfSimilarityIsOne) {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    GrayMap gt = random_mask(rng.uniform_int(5, 30), rng.uniform_int(5, 30), rng);
    double fg = 0;
    for (float v : gt.values) fg += v;
    if (fg == 0 || fg == gt.size()) continue;
    EXPECT_NEAR(s_measure(gt, gt), 1.0, 1e-6);
  }
  EXPECT_NEAR(s_measure(centered_square(16, 6), centered_square(16, 6)), 1.0, 1e-6);
}

TEST(SMeasure, DegenerateRules) {
  const GrayMap bg(8, 8, 0.0f), fg(8, 8, 1.0f);
  EXPECT_DOUBLE_EQ(s_measure(bg, bg), 1.0);
  EXPECT_DOUBLE_EQ(s_measure(fg, bg), 0.0);
  EXPECT_DOUBLE_EQ(s_measure(fg, fg), 1.0);
  EXPECT_DOUBLE_EQ(s_measure(GrayMap(8, 8, 0.25f), fg), 0.25);
  EXPECT_NEAR(sref::s_measure(fg, bg), 0.0, 1e-12);
}

TEST(SMeasure, InvertedSquareScoresLow) {
  const GrayMap gt = centered_square(16, 8);
  const double s = s_measure(invert(gt), gt);
  EXPECT_LT(s, 0.5);
  EXPECT_NEAR(s, sref::s_measure(invert(gt), gt), 1e-6);
}

TEST(Mae, Examples) {
  const GrayMap gt = centered_square(8, 4);
  EXPECT_EQ(mae(gt, gt), 0.0);
  EXPECT_EQ(mae(GrayMap(4, 4, 1.0f), GrayMap(4, 4, 0.0f)), 1.0);
  GrayMap a(2, 2, 0.0f), b = map_of(2, 2, {0.5f, 0.5f, 0.0f, 0.0f});
  EXPECT_DOUBLE_EQ(mae(a, b), 0.25);
}

TEST(Mae, Symmetric) {
  Rng rng(12);
  for (int i = 0; i < 20; ++i) {
    const GrayMap gt = random_mask(9, 7, rng);
    const GrayMap p = random_pred(gt, rng);
    EXPECT_EQ(mae(p, gt), mae(gt, p));
  }
}

TEST(Metrics, SizeMismatchIsRejected) {
  EXPECT_THROW(mae(GrayMap(2, 2), GrayMap(3, 2)), DimensionError);
  EXPECT_THROW(s_measure(GrayMap(2, 2), GrayMap(3, 2)), DimensionError);
  EXPECT_THROW(pr_curve(GrayMap(2, 2), GrayMap(3, 2)), DimensionError);
}

TEST(Metrics, PixelPermutationInvariance) {
  Rng rng(13);
  const GrayMap gt = random_mask(12, 12, rng);
  const GrayMap p = random_pred(gt, rng);
  std::vector<std::size_t> perm(gt.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  GrayMap gt2(12, 12), p2(12, 12);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    gt2.values[i] = gt.values[perm[i]];
    p2.values[i] = p.values[perm[i]];
  }
  EXPECT_NEAR(mae(p, gt), mae(p2, gt2), 1e-12);
  const FMeasure a = f_measure(p, gt), b = f_measure(p2, gt2);
  EXPECT_NEAR(a.max, b.max, 1e-12);
  EXPECT_NEAR(a.mean, b.mean, 1e-12);
}

TEST(Accumulator, PerfectPredictionsScorePerfectly) {
  Rng rng(14);
  MetricsAccumulator acc;
  for (int i = 0; i < 5; ++i) {
    const GrayMap gt = random_mask(16, 16, rng);
    acc.add(gt, gt);
  }
  const MetricsReport r = acc.finish();
  EXPECT_NEAR(r.f_beta_max, 1.0, 1e-7);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_NEAR(r.s_alpha, 1.0, 1e-6);
  EXPECT_EQ(r.pr_curve.size(), 256u);
}

TEST(Accumulator, OrderInvarianceAndDegenerateCounting) {
  Rng rng(15);
  std::vector<std::pair<GrayMap, GrayMap>> pairs;
  for (int i = 0; i < 8; ++i) {
    const GrayMap gt = random_mask(12, 10, rng);
    pairs.emplace_back(random_pred(gt, rng), gt);
  }
  pairs.emplace_back(GrayMap(12, 10, 0.1f), GrayMap(12, 10, 0.0f));
  for (PrAggregation agg : {PrAggregation::PerImage, PrAggregation::Pooled}) {
    MetricsAccumulator fwd(agg), rev(agg);
    for (const auto& [p, g] : pairs) fwd.add(p, g);
    for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) rev.add(it->first, it->second);
    const MetricsReport a = fwd.finish(), b = rev.finish();
    EXPECT_NEAR(a.f_beta_max, b.f_beta_max, 1e-12);
    EXPECT_NEAR(a.f_beta_mean, b.f_beta_mean, 1e-12);
    EXPECT_NEAR(a.s_alpha, b.s_alpha, 1e-12);
    EXPECT_NEAR(a.mae, b.mae, 1e-12);
    EXPECT_EQ(a.image_count, 9u);
    EXPECT_EQ(a.degenerate_count, 1u);
    EXPECT_GE(a.f_beta_max, a.f_beta_mean);
  }
  EXPECT_THROW(MetricsAccumulator().finish(), ContractError);
}

TEST(Reports, JsonAndCsv) {
  const auto dir = ciisod::testing::temp_dir("reports");
  MetricsAccumulator acc;
  const GrayMap gt = centered_square(8, 4);
  acc.add(gt, gt);
  const MetricsReport r = acc.finish();
  write_report_json(r, dir / "r.json");
  write_pr_csv(r, dir / "pr.csv");
  std::ifstream jf(dir / "r.json");
  const auto j = nlohmann::json::parse(jf);
  for (const char* key : {"f_beta_max", "f_beta_mean", "s_alpha", "mae", "pr_curve"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["pr_curve"].size(), 256u);
  std::ifstream cf(dir / "pr.csv");
  std::string line;
  std::getline(cf, line);
  EXPECT_EQ(line, "threshold,precision,recall");
  int rows = 0;
  while (std::getline(cf, line)) ++rows;
  EXPECT_EQ(rows, 256);
}
