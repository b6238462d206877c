#include <gtest/gtest.h>

#include "support/gradcheck.hpp"

// Finite-difference checks of every hand-derived backward pass, 64-bit.

namespace signrec::testing {
namespace {

void expect_within_tolerance(const GradReport& r) {
  EXPECT_EQ(r.seeds, kGradSeeds);
  EXPECT_LE(r.max_error, kGradTolerance) << r.name;
}

TEST(GradientCheck, Dense) { expect_within_tolerance(gradcheck_dense()); }
TEST(GradientCheck, Conv2d) { expect_within_tolerance(gradcheck_conv()); }
TEST(GradientCheck, MaxPool) { expect_within_tolerance(gradcheck_maxpool()); }
TEST(GradientCheck, Relu) { expect_within_tolerance(gradcheck_relu()); }
TEST(GradientCheck, SoftmaxCrossEntropy) { expect_within_tolerance(gradcheck_softmax_xent()); }
TEST(GradientCheck, LstmThroughTime) { expect_within_tolerance(gradcheck_lstm()); }

TEST(GradientCheck, LstmFixedShapeFiveStepsThreeInputsFourHidden) {
  std::mt19937_64 rng(77);
  LstmParams<double> p{random_tensor<double>({3, 16}, rng), random_tensor<double>({4, 16}, rng),
                       random_tensor<double>({16}, rng)};
  TensorD xs = random_tensor<double>({5, 3}, rng);
  const TensorD r_out = random_tensor<double>({4}, rng);
  auto loss = [&] { return weighted_sum(lstm_forward(xs, p).h_last, r_out); };
  const auto g = lstm_backward(r_out, lstm_forward(xs, p).caches, p);
  EXPECT_LE(check_gradient(p.input_weight, g.grad_input_weight, loss), kGradTolerance);
  EXPECT_LE(check_gradient(p.recurrent_weight, g.grad_recurrent_weight, loss), kGradTolerance);
  EXPECT_LE(check_gradient(p.bias, g.grad_bias, loss), kGradTolerance);
  EXPECT_LE(check_gradient(xs, g.grad_inputs, loss), kGradTolerance);
}

}  // namespace
}  // namespace signrec::testing
