#include <gtest/gtest.h>

#include "ciisod/gradcheck.hpp"
#include "ciisod/nn.hpp"
#include "ciisod/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ciisod;
using ciisod::testing::random_tensor;

namespace {
std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }
}  // namespace

TEST(Conv2d, OnesKernelWindowSums) {
  Tensor<double> x(Shape{1, 1, 3, 3}, 1.0);
  Tensor<double> w(Shape{1, 1, 3, 3}, 1.0);
  const auto y = conv2d(x, w, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 1), 9.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 2), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 1), 6.0);
}

TEST(Conv2d, UnitPointwiseKernelIsIdentity) {
  Rng rng(2);
  Tensor<double> x = random_tensor(Shape{2, 1, 5, 6}, rng);
  Tensor<double> w(Shape{1, 1, 1, 1}, 1.0);
  EXPECT_EQ(values(conv2d(x, w, 1, 0)), values(x));
}

TEST(Conv2d, StridedRandomMatchesLoopOracle) {
  Rng rng(5);
  Tensor<double> x = random_tensor(Shape{1, 3, 8, 8}, rng);
  Tensor<double> w = random_tensor(Shape{4, 3, 3, 3}, rng);
  Shape os;
  const auto expect = oracle::conv2d(x, w, Tensor<double>(), 2, 1, os);
  const auto y = conv2d(x, w, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 4, 4, 4}));
  EXPECT_LT(ciisod::testing::max_abs_diff(y, expect), 1e-6);
}

TEST(Conv2d, DiracKernelIsIdentity) {
  Rng rng(6);
  for (int k : {1, 3, 7}) {
    const int c = 3;
    Tensor<double> x = random_tensor(Shape{2, c, 9, 9}, rng);
    Tensor<double> w(Shape{c, c, k, k}, 0.0);
    for (int i = 0; i < c; ++i) w.at(i, i, k / 2, k / 2) = 1.0;
    EXPECT_EQ(values(conv2d(x, w, 1, k / 2)), values(x)) << "k=" << k;
  }
}

TEST(Conv2d, TranslationEquivariantOnInterior) {
  Rng rng(7);
  Tensor<double> x = random_tensor(Shape{1, 2, 12, 12}, rng);
  Tensor<double> shifted(Shape{1, 2, 12, 12}, 0.0);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 11; ++y)
      for (int xx = 0; xx < 10; ++xx) shifted.at(0, c, y + 1, xx + 2) = x.at(0, c, y, xx);
  Tensor<double> w = random_tensor(Shape{3, 2, 3, 3}, rng);
  const auto a = conv2d(x, w, 1, 1);
  const auto b = conv2d(shifted, w, 1, 1);
  for (int c = 0; c < 3; ++c)
    for (int y = 1; y < 10; ++y)
      for (int xx = 1; xx < 9; ++xx) EXPECT_NEAR(b.at(0, c, y + 1, xx + 2), a.at(0, c, y, xx), 1e-12);
}

TEST(Conv2d, RejectsChannelMismatchAndOversizedWindow) {
  EXPECT_THROW(conv2d(Tensor<double>(Shape{1, 2, 5, 5}), Tensor<double>(Shape{1, 3, 3, 3}), 1, 1),
               DimensionError);
  EXPECT_THROW(conv2d(Tensor<double>(Shape{1, 1, 2, 2}), Tensor<double>(Shape{1, 1, 7, 7}), 1, 0),
               DimensionError);
}

TEST(Conv2d, FloatPathAgreesWithDouble) {
  Rng rng(8);
  Tensor<double> x = random_tensor(Shape{2, 4, 10, 10}, rng);
  Tensor<double> w = random_tensor(Shape{5, 4, 3, 3}, rng);
  std::vector<float> xf(x.data().begin(), x.data().end()), wf(w.data().begin(), w.data().end());
  const auto yd = conv2d(x, w, 2, 1);
  const auto yf = conv2d(Tensor<float>(x.shape(), xf), Tensor<float>(w.shape(), wf), 2, 1);
  for (std::size_t i = 0; i < yd.numel(); ++i) EXPECT_NEAR(yf.data()[i], yd.data()[i], 1e-4);
}

TEST(KernelOracles, ConvOnFiftyShapes) {
  const auto r = oracle::sweep_conv(60, 1);
  EXPECT_GE(r.shapes, 50);
  EXPECT_LE(r.forward_error, 1e-6);
}

TEST(KernelOracles, MaxPoolOnFiftyShapesWithTies) {
  const auto r = oracle::sweep_maxpool(60, 1);
  EXPECT_GE(r.shapes, 50);
  EXPECT_EQ(r.forward_error, 0.0);
  EXPECT_EQ(r.grad_error, 0.0);
}

TEST(KernelOracles, GlobalMaxPoolOnFiftyShapesWithTies) {
  const auto r = oracle::sweep_gmp(60, 1);
  EXPECT_GE(r.shapes, 50);
  EXPECT_EQ(r.forward_error, 0.0);
  EXPECT_EQ(r.grad_error, 0.0);
}

TEST(KernelOracles, BilinearOnFiftyShapes) {
  const auto r = oracle::sweep_bilinear(60, 1);
  EXPECT_GE(r.shapes, 50);
  EXPECT_LE(r.forward_error, 1e-6);
  EXPECT_LE(r.grad_error, 1e-6);
}

TEST(BatchNorm, TrainModeConstantChannelGivesBeta) {
  Tensor<double> x(Shape{2, 2, 3, 3}, 0.0);
  for (int n = 0; n < 2; ++n)
    for (int y = 0; y < 3; ++y)
      for (int xx = 0; xx < 3; ++xx) {
        x.at(n, 0, y, xx) = 4.0;
        x.at(n, 1, y, xx) = -1.5;
      }
  Tensor<double> gamma(Shape{1, 2, 1, 1}, {3.0, 0.5});
  Tensor<double> beta(Shape{1, 2, 1, 1}, {0.25, -0.75});
  BatchNormState<double> state(2);
  const auto y = batchnorm2d(x, gamma, beta, state, Mode::Train);
  for (int n = 0; n < 2; ++n)
    for (int y0 = 0; y0 < 3; ++y0) {
      EXPECT_NEAR(y.at(n, 0, y0, 1), 0.25, 1e-12);
      EXPECT_NEAR(y.at(n, 1, y0, 1), -0.75, 1e-12);
    }
}

TEST(BatchNorm, EvalWithUnitStatisticsIsIdentity) {
  Rng rng(3);
  Tensor<double> x = random_tensor(Shape{2, 3, 4, 4}, rng);
  Tensor<double> gamma(Shape{1, 3, 1, 1}, 1.0), beta(Shape{1, 3, 1, 1}, 0.0);
  BatchNormState<double> state(3);
  state.batches_tracked = 1;
  const BatchNormOptions opts{0.0, 0.1};
  const auto y = batchnorm2d(x, gamma, beta, state, Mode::Eval, opts);
  EXPECT_LT(ciisod::testing::max_abs_diff(y, values(x)), 1e-12);
  const auto y_eps = batchnorm2d(x, gamma, beta, state, Mode::Eval);
  EXPECT_LT(ciisod::testing::max_abs_diff(y_eps, values(x)), 1e-5);
}

TEST(BatchNorm, TrainModeNormalizesAndUpdatesRunningStatistics) {
  Rng rng(4);
  Tensor<double> x = random_tensor(Shape{3, 2, 4, 4}, rng);
  Tensor<double> gamma(Shape{1, 2, 1, 1}, 1.0), beta(Shape{1, 2, 1, 1}, 0.0);
  BatchNormState<double> state(2);
  const auto y = batchnorm2d(x, gamma, beta, state, Mode::Train);
  for (int c = 0; c < 2; ++c) {
    double mean = 0, sq = 0, ym = 0, yv = 0;
    const int m = 3 * 16;
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 16; ++i) {
        mean += x.at(n, c, i / 4, i % 4) / m;
        ym += y.at(n, c, i / 4, i % 4) / m;
      }
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 16; ++i) {
        sq += std::pow(x.at(n, c, i / 4, i % 4) - mean, 2);
        yv += std::pow(y.at(n, c, i / 4, i % 4) - ym, 2) / m;
      }
    EXPECT_NEAR(ym, 0.0, 1e-12);
    EXPECT_NEAR(yv, (sq / m) / (sq / m + 1e-5), 1e-9);
    EXPECT_NEAR(state.running_mean[c], 0.1 * mean, 1e-12);
    EXPECT_NEAR(state.running_var[c], 0.9 + 0.1 * sq / (m - 1), 1e-12);
  }
  EXPECT_EQ(state.batches_tracked, 1);
}

TEST(BatchNorm, GradcheckTrainAndEval) {
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    Rng rng(11);
    Tensor<double> x = random_tensor(Shape{2, 3, 4, 4}, rng, -2, 2, true);
    Tensor<double> gamma = random_tensor(Shape{1, 3, 1, 1}, rng, 0.5, 1.5, true);
    Tensor<double> beta = random_tensor(Shape{1, 3, 1, 1}, rng, -1, 1, true);
    Tensor<double> p = random_tensor(Shape{2, 3, 4, 4}, rng);
    BatchNormState<double> state(3);
    state.batches_tracked = 1;
    auto report = gradcheck(
        [&] {
          BatchNormState<double> s = state;
          return weighted_sum(batchnorm2d(x, gamma, beta, s, mode), p);
        },
        {{x, "x"}, {gamma, "gamma"}, {beta, "beta"}});
    EXPECT_TRUE(report.passed) << report.diagnostic;
    EXPECT_LE(report.max_error(), 1e-4);
  }
}

TEST(MaxPool, TwoByTwoExample) {
  Tensor<double> x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const auto y = maxpool2d(x, 2, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.item(), 4.0);
}

TEST(MaxPool, ConstantMapStaysConstant) {
  Tensor<double> x(Shape{1, 2, 8, 8}, 0.7);
  for (int k : {2, 3}) {
    const auto y = maxpool2d(x, k, 2);
    for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.7);
  }
}

TEST(GlobalMaxPool, PicksMaximum) {
  Tensor<double> x(Shape{1, 1, 2, 2}, {-1, 0, 5, 2});
  EXPECT_DOUBLE_EQ(global_max_pool(x).item(), 5.0);
}

TEST(GlobalMaxPool, TieRoutesGradientToFirstIndex) {
  Tensor<double> x(Shape{1, 1, 3, 3}, 2.0, true);
  const auto y = global_max_pool(x);
  EXPECT_DOUBLE_EQ(y.item(), 2.0);
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
  for (std::size_t i = 1; i < 9; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 0.0);
}

TEST(Bilinear, ConstantMapStaysConstant) {
  Tensor<double> x(Shape{1, 1, 5, 7}, 0.3);
  for (auto [h, w] : {std::pair{10, 14}, {2, 3}, {13, 1}, {1, 1}}) {
    const auto y = bilinear_resize(x, h, w);
    for (double v : y.data()) EXPECT_NEAR(v, 0.3, 1e-15);
  }
}

TEST(Bilinear, HalfPixelUpsample) {
  Tensor<double> x(Shape{1, 1, 1, 2}, {0.0, 1.0});
  const auto y = bilinear_resize(x, 1, 4);
  const std::vector<double> expect{0.0, 0.25, 0.75, 1.0};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y.data()[i], expect[i], 1e-15);
}

TEST(Bilinear, SameSizeIsIdentity) {
  Rng rng(12);
  Tensor<double> x = random_tensor(Shape{2, 3, 6, 9}, rng);
  EXPECT_LT(ciisod::testing::max_abs_diff(bilinear_resize(x, 6, 9), values(x)), 1e-6);
}

TEST(Bilinear, CheckerboardAliases) {
  Tensor<double> x(Shape{1, 1, 8, 8});
  for (int y = 0; y < 8; ++y)
    for (int xx = 0; xx < 8; ++xx) x.at(0, 0, y, xx) = (y + xx) % 2;
  const auto back = bilinear_resize(bilinear_resize(x, 2, 2), 8, 8);
  double l2 = 0;
  for (std::size_t i = 0; i < 64; ++i) l2 += std::pow(back.data()[i] - x.data()[i], 2);
  EXPECT_GT(std::sqrt(l2), 0.0);
}

TEST(AdaptiveAvgPool, MatchesCellAverages) {
  Rng rng(13);
  Tensor<double> x = random_tensor(Shape{1, 2, 7, 5}, rng);
  for (int bins : {1, 2, 3, 6}) {
    const auto y = adaptive_avg_pool(x, bins);
    ASSERT_EQ(y.shape(), (Shape{1, 2, bins, bins}));
    for (int c = 0; c < 2; ++c)
      for (int by = 0; by < bins; ++by)
        for (int bx = 0; bx < bins; ++bx) {
          const int y0 = by * 7 / bins, y1 = ((by + 1) * 7 + bins - 1) / bins;
          const int x0 = bx * 5 / bins, x1 = ((bx + 1) * 5 + bins - 1) / bins;
          double acc = 0;
          for (int yy = y0; yy < y1; ++yy)
            for (int xx = x0; xx < x1; ++xx) acc += x.at(0, c, yy, xx);
          EXPECT_NEAR(y.at(0, c, by, bx), acc / ((y1 - y0) * (x1 - x0)), 1e-12);
        }
  }
}

TEST(Concat, ShapesAndIdentity) {
  Rng rng(14);
  Tensor<double> a = random_tensor(Shape{1, 2, 4, 4}, rng, -2, 2, true);
  Tensor<double> b = random_tensor(Shape{1, 3, 4, 4}, rng, -2, 2, true);
  const auto y = concat_channels<double>({a, b});
  EXPECT_EQ(y.shape(), (Shape{1, 5, 4, 4}));
  EXPECT_EQ(y.at(0, 3, 2, 1), b.at(0, 1, 2, 1));
  EXPECT_EQ(values(concat_channels<double>({a})), values(a));
  sum(y).backward();
  for (double g : a.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
  for (double g : b.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
  EXPECT_THROW(concat_channels<double>({a, Tensor<double>(Shape{1, 1, 3, 4})}), DimensionError);
}
