#include <gtest/gtest.h>

#include <set>

#include "ciisod/accounting.hpp"
#include "ciisod/backbone.hpp"
#include "ciisod/ops.hpp"
#include "test_util.hpp"

using namespace ciisod;
using ciisod::testing::random_tensor;

namespace {
std::vector<int> sizes(const FeaturePyramid<float>& p) {
  std::vector<int> s;
  for (const auto& t : p.stages) s.push_back(t.shape().h);
  return s;
}
}  // namespace

TEST(Backbone, ResNet18StageSizesAt352) {
  Backbone<float> net(BackboneConfig::resnet18(352), 1);
  NoGradGuard guard;
  Rng rng(1);
  const auto p = net.forward(random_tensor<float>(Shape{1, 3, 352, 352}, rng, 0, 1), Mode::Train);
  EXPECT_EQ(sizes(p), (std::vector<int>{176, 88, 44, 22, 11}));
  EXPECT_EQ(p.stages[4].shape().c, 512);
  EXPECT_EQ(p.strides, (std::vector<int>{2, 4, 8, 16, 32}));
}

TEST(Backbone, TinyAt64) {
  Backbone<float> net(BackboneConfig::tiny(64), 1);
  Rng rng(2);
  const auto p = net.forward(random_tensor<float>(Shape{3, 3, 64, 64}, rng, 0, 1), Mode::Train);
  EXPECT_EQ(sizes(p), (std::vector<int>{32, 16, 8, 4, 2}));
  EXPECT_EQ(p.stages[4].shape(), (Shape{3, 128, 2, 2}));
  for (std::size_t i = 1; i < p.stages.size(); ++i) {
    EXPECT_EQ(p.stages[i].shape().h * 2, p.stages[i - 1].shape().h);
    EXPECT_EQ(p.stages[i].shape().w * 2, p.stages[i - 1].shape().w);
  }
}

TEST(Backbone, ResNet18ParameterCount) {
  Backbone<float> net(BackboneConfig::resnet18(352), 1);
  StateList<float> entries;
  net.collect(entries);
  std::int64_t total = 0;
  for (const auto& e : entries) {
    if (e.learnable) total += static_cast<std::int64_t>(e.count());
  }
  // conv + BN affine weights, no classifier
  EXPECT_EQ(total, 11176512);
  EXPECT_NEAR(total / 11.18e6, 1.0, 0.02);
}

TEST(Backbone, SameSeedGivesIdenticalParameters) {
  Backbone<float> a(BackboneConfig::tiny(64), 42), b(BackboneConfig::tiny(64), 42),
      c(BackboneConfig::tiny(64), 43);
  StateList<float> ea, eb, ec;
  a.collect(ea);
  b.collect(eb);
  c.collect(ec);
  ASSERT_EQ(ea.size(), eb.size());
  bool any_differs = false;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    ASSERT_EQ(ea[i].name, eb[i].name);
    EXPECT_TRUE(std::equal(ea[i].values, ea[i].values + ea[i].count(), eb[i].values));
    if (!std::equal(ea[i].values, ea[i].values + ea[i].count(), ec[i].values)) any_differs = true;
  }
  EXPECT_TRUE(any_differs);
}

TEST(Backbone, ZeroInputGivesZeroStages) {
  Backbone<float> net(BackboneConfig::tiny(64), 3);
  const auto p = net.forward(Tensor<float>(Shape{2, 3, 64, 64}, 0.0f), Mode::Train);
  for (const auto& s : p.stages) {
    for (float v : s.data()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Backbone, RejectsWrongInputs) {
  Backbone<float> net(BackboneConfig::tiny(64), 3);
  EXPECT_THROW(net.forward(Tensor<float>(Shape{1, 1, 64, 64}), Mode::Train), DimensionError);
  EXPECT_THROW(net.forward(Tensor<float>(Shape{1, 3, 96, 96}), Mode::Train), DimensionError);
  EXPECT_THROW(BackboneConfig::tiny(70).validate(), ConfigError);
  EXPECT_THROW(Backbone<float>(BackboneConfig::resnet50(), 1), ConfigError);
}

TEST(Backbone, EveryStageSendsGradientToStem) {
  Rng rng(5);
  const Tensor<double> x = random_tensor(Shape{2, 3, 64, 64}, rng, 0, 1);
  for (int stage = 0; stage < 5; ++stage) {
    Backbone<double> net(BackboneConfig::tiny(64), 7);
    StateList<double> entries;
    net.collect(entries);
    const auto p = net.forward(x, Mode::Train);
    const auto probe = random_tensor(p.stages[stage].shape(), rng);
    weighted_sum(p.stages[stage], probe).backward();
    const auto& stem = entries.front();
    ASSERT_EQ(stem.name.rfind("backbone.stem", 0), 0u) << stem.name;
    double norm = 0;
    for (double g : stem.tensor.grad()) norm += g * g;
    EXPECT_GT(norm, 0.0) << "stage " << stage + 1;
  }
}
