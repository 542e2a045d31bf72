#include <gtest/gtest.h>

#include <thread>

#include "ciisod/gradcheck.hpp"
#include "ciisod/ops.hpp"
#include "test_util.hpp"

using namespace ciisod;
using ciisod::testing::random_tensor;

TEST(Tensor, SquareGradient) {
  Tensor<double> x = Tensor<double>::scalar(3.0, true);
  Tensor<double> loss = mul(x, x);
  EXPECT_DOUBLE_EQ(loss.item(), 9.0);
  loss.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Tensor, SumSigmoidGradient) {
  Tensor<double> x(Shape{1, 1, 2, 2}, 0.0, true);
  sum(sigmoid(x)).backward();
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(Tensor, LeafGradientsAccumulateUntilZeroed) {
  Tensor<double> x = Tensor<double>::scalar(2.0, true);
  mul(x, x).backward();
  mul(x, x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
}

TEST(Tensor, NoGradInputsNeverAccumulate) {
  Tensor<double> a(Shape{1, 1, 2, 2}, 1.5, false);
  Tensor<double> b(Shape{1, 1, 2, 2}, 2.0, true);
  sum(mul(a, b)).backward();
  EXPECT_FALSE(a.has_grad());
  for (double g : b.grad()) EXPECT_DOUBLE_EQ(g, 1.5);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  Tensor<double> x(Shape{1, 1, 1, 1}, 1.0, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(NoGradGuard::grad_enabled());
    EXPECT_FALSE(sigmoid(x).has_node());
  }
  EXPECT_TRUE(NoGradGuard::grad_enabled());
  EXPECT_TRUE(sigmoid(x).has_node());
}

TEST(Tensor, BackwardOnNonScalarIsContractError) {
  Tensor<double> x(Shape{1, 1, 2, 2}, 1.0, true);
  EXPECT_THROW(sigmoid(x).backward(), ContractError);
}

TEST(Tensor, CopiesShareStorageAndCloneDoesNot) {
  Tensor<double> a(Shape{1, 1, 1, 2}, 1.0);
  Tensor<double> b = a;
  Tensor<double> c = a.clone();
  b.data()[0] = 7.0;
  EXPECT_DOUBLE_EQ(a.data()[0], 7.0);
  EXPECT_DOUBLE_EQ(c.data()[0], 1.0);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, ValueCountMismatchIsRejected) {
  EXPECT_THROW(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(Tensor, ReusedNodeGetsBothContributions) {
  // y = s + s with s = sigmoid(x): dy/dx = 2 s (1 - s)
  Tensor<double> x = Tensor<double>::scalar(0.0, true);
  Tensor<double> s = sigmoid(x);
  add(s, s).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.5);
}

TEST(Tensor, LinearLayerGradientMatchesFiniteDifferences) {
  Rng rng(3);
  Tensor<double> w = random_tensor(Shape{1, 4, 1, 1}, rng, -2, 2, true);
  Tensor<double> x = random_tensor(Shape{1, 4, 1, 1}, rng);
  auto report = gradcheck([&] { return sum(mul(x, w)); }, {{w, "w"}});
  EXPECT_TRUE(report.passed) << report.diagnostic;
  EXPECT_LT(report.max_error(), 1e-8);
}

TEST(Tensor, ThreeLayerGraphMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor<double> x = random_tensor(Shape{2, 3, 3, 3}, rng);
    Tensor<double> a = random_tensor(Shape{2, 3, 1, 1}, rng, -2, 2, true);
    Tensor<double> b = random_tensor(Shape{2, 3, 3, 3}, rng, -2, 2, true);
    Tensor<double> c = random_tensor(Shape{2, 3, 1, 1}, rng, -2, 2, true);
    Tensor<double> probe = random_tensor(Shape{2, 3, 3, 3}, rng);
    auto loss = [&] {
      Tensor<double> h = sigmoid(add(mul(x, a), b));
      h = sigmoid(mul(h, c));
      return weighted_sum(add(h, b), probe);
    };
    auto report = gradcheck(loss, {{a, "a"}, {b, "b"}, {c, "c"}});
    EXPECT_TRUE(report.passed) << report.diagnostic;
  }
}

TEST(Tensor, GraphEvaluationIsDeterministic) {
  Rng rng(9);
  Tensor<double> x = random_tensor(Shape{2, 3, 5, 5}, rng);
  Tensor<double> g = random_tensor(Shape{2, 3, 1, 1}, rng);
  auto f = [&] { return sigmoid(add(mul(x, g), x)); };
  const Tensor<double> y1 = f(), y2 = f();
  EXPECT_TRUE(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}

TEST(Tensor, IndependentGraphsOnThreads) {
  Rng rng(4);
  Tensor<double> x = random_tensor(Shape{1, 2, 8, 8}, rng);
  const Tensor<double> ref = sigmoid(mul(x, x));
  std::vector<std::vector<double>> results(4);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      Tensor<double> local = x.clone();
      local.set_requires_grad(true);
      Tensor<double> y = sigmoid(mul(local, local));
      sum(y).backward();
      results[t].assign(y.data().begin(), y.data().end());
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& r : results) {
    EXPECT_TRUE(std::equal(r.begin(), r.end(), ref.data().begin()));
  }
}
