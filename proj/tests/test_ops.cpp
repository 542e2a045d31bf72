#include <gtest/gtest.h>

#include "ciisod/gradcheck.hpp"
#include "ciisod/ops.hpp"
#include "test_util.hpp"

using namespace ciisod;
using ciisod::testing::random_tensor;

TEST(Elementwise, AddConstantShift) {
  Tensor<double> a(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> b(Shape{1, 1, 2, 2}, 1.0);
  const auto y = add(a, b);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()),
            (std::vector<double>{2, 3, 4, 5}));
}

TEST(Elementwise, MulByOnesGateIsIdentity) {
  Rng rng(1);
  Tensor<double> a = random_tensor(Shape{2, 3, 4, 5}, rng);
  Tensor<double> ones(Shape{2, 3, 1, 1}, 1.0);
  const auto y = mul(a, ones);
  EXPECT_TRUE(std::equal(y.data().begin(), y.data().end(), a.data().begin()));
}

TEST(Elementwise, BroadcastMulMatchesLoopOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Shape s{rng.uniform_int(1, 3), rng.uniform_int(1, 4), rng.uniform_int(1, 6),
                  rng.uniform_int(1, 6)};
    Tensor<double> a = random_tensor(s, rng, -2, 2, true);
    Tensor<double> b = random_tensor(Shape{s.n, s.c, 1, 1}, rng, -2, 2, true);
    Tensor<double> up = random_tensor(s, rng);
    const auto y = mul(a, b);
    weighted_sum(y, up).backward();
    std::vector<double> gb(b.numel(), 0.0);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int yy = 0; yy < s.h; ++yy)
          for (int x = 0; x < s.w; ++x) {
            EXPECT_EQ(y.at(n, c, yy, x), a.at(n, c, yy, x) * b.at(n, c, 0, 0));
            EXPECT_NEAR(a.grad()[((n * s.c + c) * s.h + yy) * s.w + x],
                        up.at(n, c, yy, x) * b.at(n, c, 0, 0), 1e-12);
            gb[n * s.c + c] += up.at(n, c, yy, x) * a.at(n, c, yy, x);
          }
    EXPECT_LT(ciisod::testing::max_abs_diff<double>(b.grad(), std::span<const double>(gb)), 1e-12);
  }
}

TEST(Elementwise, MismatchNamesBothShapes) {
  Tensor<double> a(Shape{1, 2, 3, 3});
  Tensor<double> b(Shape{1, 2, 4, 4});
  try {
    add(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(a.shape().str()), std::string::npos) << msg;
    EXPECT_NE(msg.find(b.shape().str()), std::string::npos) << msg;
  }
}

TEST(Activation, Values) {
  Tensor<double> z = Tensor<double>::scalar(0.0);
  EXPECT_DOUBLE_EQ(sigmoid(z).item(), 0.5);
  EXPECT_DOUBLE_EQ(relu(Tensor<double>::scalar(-3.0)).item(), 0.0);
  EXPECT_DOUBLE_EQ(relu(Tensor<double>::scalar(3.0)).item(), 3.0);
}

TEST(Activation, SigmoidGradientAtZero) {
  Tensor<double> x = Tensor<double>::scalar(0.0, true);
  sigmoid(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
  auto report = gradcheck([&] { return sigmoid(x); }, {{x, "x"}});
  EXPECT_TRUE(report.passed) << report.diagnostic;
}

TEST(Activation, RandomGradcheck) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor<double> x = random_tensor(Shape{2, 3, 4, 4}, rng, -2, 2, true);
    // keep relu inputs away from the kink
    for (double& v : x.data()) {
      if (std::abs(v) < 1e-2) v = 0.5;
    }
    Tensor<double> p = random_tensor(Shape{2, 3, 4, 4}, rng);
    auto r1 = gradcheck([&] { return weighted_sum(relu(x), p); }, {{x, "x"}});
    auto r2 = gradcheck([&] { return weighted_sum(sigmoid(x), p); }, {{x, "x"}});
    EXPECT_TRUE(r1.passed) << r1.diagnostic;
    EXPECT_TRUE(r2.passed) << r2.diagnostic;
  }
}

TEST(Activation, SigmoidIsStableForLargeInputs) {
  const double lo = sigmoid(Tensor<double>::scalar(-800.0)).item();
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(lo, 1e-30);
  EXPECT_DOUBLE_EQ(sigmoid(Tensor<double>::scalar(800.0)).item(), 1.0);
  EXPECT_TRUE(std::isfinite(sigmoid(Tensor<float>::scalar(-800.0f)).item()));
}
