#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "signrec/optim.hpp"
#include "support/oracles.hpp"

namespace signrec {
namespace {

using testing::random_tensor;

TEST(AdamTest, ZeroGradientLeavesParameterUnchanged) {
  std::mt19937_64 rng(1);
  auto param = random_tensor<float>({4, 3}, rng);
  const auto before = param;
  AdamState<float> state(param.shape());
  adam_step(param, Tensor({4, 3}), state);
  EXPECT_EQ(param, before);
  EXPECT_EQ(state.t, 1u);
}

TEST(AdamTest, FirstStepMovesEveryCoordinateByAboutLr) {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto param = random_tensor<double>({7}, rng);
    const auto before = param;
    const auto grad = random_tensor<double>({7}, rng, -3, 3);
    AdamState<double> state(param.shape());
    adam_step(param, grad, state);
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double delta = param[i] - before[i];
      EXPECT_LE(std::abs(delta), 1e-3);
      EXPECT_GE(std::abs(delta), 0.9e-3);
      EXPECT_EQ(std::signbit(delta), !std::signbit(grad[i]));
    }
  }
}

TEST(AdamTest, ConstantUnitGradientTwoStepsMatchesHandRecurrence) {
  // m-hat = v-hat = 1 at both steps, so each step moves by lr / (1 + eps).
  TensorD param({1}, 1.0);
  AdamState<double> state(param.shape(), {0.1, 0.9, 0.999, 1e-8});
  adam_step(param, TensorD({1}, 1.0), state);
  EXPECT_NEAR(param[0], 0.900000001, 1e-12);
  adam_step(param, TensorD({1}, 1.0), state);
  EXPECT_NEAR(param[0], 0.800000002, 1e-12);
  EXPECT_NEAR(state.m[0], 0.19, 1e-15);
  EXPECT_NEAR(state.v[0], 0.001999, 1e-15);
  EXPECT_EQ(state.t, 2u);
}

TEST(AdamTest, SignFlipTrajectoryMatchesHandRecurrence) {
  TensorD param({1}, 1.0);
  AdamState<double> state(param.shape(), {0.1, 0.9, 0.999, 1e-8});
  adam_step(param, TensorD({1}, 1.0), state);
  adam_step(param, TensorD({1}, -0.5), state);
  EXPECT_NEAR(param[0], 0.8733662973709032, 1e-12);
  EXPECT_NEAR(state.m[0], 0.04, 1e-15);
  EXPECT_NEAR(state.v[0], 0.001249, 1e-15);
}

TEST(AdamTest, NonFiniteGradientNamesParameter) {
  Tensor param({2}, 1.0f);
  AdamState<float> state(param.shape());
  try {
    adam_step(param, Tensor::vector({0.1f, NAN}), state, "head.weight");
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("head.weight"), std::string::npos);
  }
  EXPECT_EQ(state.t, 0u);
  EXPECT_EQ(param, Tensor({2}, 1.0f));
}

TEST(AdamTest, ShapeMismatchThrows) {
  Tensor param({3});
  AdamState<float> state(param.shape());
  EXPECT_THROW(adam_step(param, Tensor({2}), state), ShapeError);
}

TEST(AdamTest, ReplayIsBitwiseIdenticalAndSecondMomentNonNegative) {
  std::mt19937_64 rng(9);
  std::vector<Tensor> grads;
  for (int i = 0; i < 50; ++i) grads.push_back(random_tensor<float>({5, 5}, rng, -10, 10));
  auto run = [&] {
    Tensor p({5, 5}, 0.5f);
    AdamState<float> s(p.shape());
    for (const auto& g : grads) {
      adam_step(p, g, s);
      for (float v : s.v.data()) EXPECT_GE(v, 0.0f);
    }
    EXPECT_EQ(s.t, grads.size());
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(SgdTest, ZeroLearningRateIsIdentity) {
  Tensor p = Tensor::vector({1, 2, 3});
  sgd_step(p, Tensor::vector({4, 5, 6}), 0.0);
  EXPECT_EQ(p, Tensor::vector({1, 2, 3}));
}

TEST(SgdTest, PlainArithmetic) {
  TensorD p({1}, 1.0);
  sgd_step(p, TensorD({1}, 0.5), 0.1);
  EXPECT_DOUBLE_EQ(p[0], 0.95);
}

TEST(SgdTest, FirstStepDirectionMatchesAdam) {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto start = random_tensor<double>({10}, rng);
    const auto grad = random_tensor<double>({10}, rng);
    auto sgd = start, adam = start;
    AdamState<double> state(start.shape());
    sgd_step(sgd, grad, 0.01);
    adam_step(adam, grad, state);
    for (std::size_t i = 0; i < start.size(); ++i) {
      EXPECT_EQ(std::signbit(sgd[i] - start[i]), std::signbit(adam[i] - start[i]));
    }
  }
}

TEST(ClipTest, ScalesOnlyAboveThreshold) {
  Tensor a = Tensor::vector({3, 0});
  Tensor b = Tensor::vector({0, 4});
  std::vector<Tensor*> grads{&a, &b};
  EXPECT_DOUBLE_EQ(clip_global_norm<float>(std::span<Tensor* const>(grads), 10.0), 5.0);
  EXPECT_EQ(a[0], 3.0f);
  clip_global_norm<float>(std::span<Tensor* const>(grads), 1.0);
  EXPECT_NEAR(a[0], 0.6f, 1e-6);
  EXPECT_NEAR(b[1], 0.8f, 1e-6);
}

}  // namespace
}  // namespace signrec
