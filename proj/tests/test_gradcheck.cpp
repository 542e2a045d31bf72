#include <gtest/gtest.h>

#include "ciisod/gradcheck_suite.hpp"
#include "ciisod/ops.hpp"

using namespace ciisod;

TEST(Gradcheck, DetectsWrongGradient) {
  // backward of relu is exact; perturbing the value after backward is not
  Tensor<double> x(Shape{1, 1, 1, 3}, {0.5, -1.0, 2.0}, true);
  Tensor<double> w(Shape{1, 1, 1, 3}, {1.0, 2.0, 3.0});
  auto loss = [&] {
    Tensor<double> y = weighted_sum(sigmoid(x), w);
    // scale the value but not the gradient
    return Tensor<double>::make_result(Shape{1, 1, 1, 1}, {2.0 * y.item()}, {&y},
                                       [](detail::TensorImpl<double>& node) {
                                         node.inputs[0]->ensure_grad();
                                         node.inputs[0]->grad[0] += node.grad[0];
                                       });
  };
  const auto report = gradcheck(loss, {{x, "x"}});
  EXPECT_FALSE(report.passed);
  EXPECT_FALSE(report.diagnostic.empty());
}

TEST(Gradcheck, UnknownModuleIsConfigError) {
  EXPECT_THROW(run_gradcheck_suite("attention", 1), ConfigError);
}

class SuiteModule : public ::testing::TestWithParam<std::string> {};

TEST_P(SuiteModule, PassesOnThreeSeeds) {
  const std::string module = GetParam();
  const int seeds = module == "model" ? 1 : 3;
  for (const auto& c : run_gradcheck_suite(module, seeds, 100)) {
    EXPECT_TRUE(c.report.passed) << c.module << "/" << c.name << " seed " << c.seed << ": "
                                 << c.report.diagnostic;
    EXPECT_LE(c.report.max_error(), 1e-4) << c.module << "/" << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(AllModules, SuiteModule, ::testing::ValuesIn(gradcheck_modules()));
