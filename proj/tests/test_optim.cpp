#include "rode/core/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "rode/core/rng.hpp"
#include "rode/core/tensor.hpp"

using namespace rode;

TEST(Rmsprop, HandComputedFirstStep) {
  // p=1, g=1, fresh state, alpha=0.99, lr=0.1:
  //   E = 0.99*0 + 0.01*1 = 0.01
  //   p = 1 - 0.1 * 1 / (sqrt(0.01) + 1e-5) = 1 - 0.1/0.10001
  Tensor p = Tensor::scalar(1.0, true);
  p.grad()[0] = 1.0;
  Rmsprop opt({p}, 0.1, 0.99, 0.0);
  opt.step();
  EXPECT_NEAR(opt.state()[0][0], 0.01, 1e-15);
  EXPECT_NEAR(p.value(), 1.0 - 0.1 / (0.1 + 1e-5), 1e-12);
  EXPECT_NEAR(p.value(), 0.00010, 5e-5);
}

TEST(Rmsprop, ZeroGradientDecaysStateOnly) {
  Tensor p = Tensor::scalar(2.0, true);
  p.grad()[0] = 1.0;
  Rmsprop opt({p}, 0.1, 0.99, 0.0);
  opt.step();
  const double pv = p.value();
  const double ev = opt.state()[0][0];
  // Second step with g = 0: parameter unchanged, E decayed by alpha.
  opt.step();
  EXPECT_DOUBLE_EQ(p.value(), pv);
  EXPECT_NEAR(opt.state()[0][0], 0.99 * ev, 1e-15);
}

TEST(Rmsprop, GradsZeroedAfterStep) {
  Tensor p = Tensor::scalar(1.0, true);
  p.grad()[0] = 3.0;
  Rmsprop opt({p}, 0.1);
  opt.step();
  EXPECT_DOUBLE_EQ(p.grad()[0], 0.0);
}

TEST(Rmsprop, GlobalNormClipScalesUpdate) {
  // Two parameters with gradient (3, 4): norm 5. Clip at 1 -> effective
  // gradient (0.6, 0.8); the RMSProp denominator then sees the clipped g.
  Tensor a = Tensor::scalar(0.0, true);
  Tensor b = Tensor::scalar(0.0, true);
  a.grad()[0] = 3.0;
  b.grad()[0] = 4.0;
  Rmsprop opt({a, b}, 1.0, 0.99, 1.0);
  EXPECT_DOUBLE_EQ(opt.grad_global_norm(), 5.0);
  opt.step();
  const double ea = 0.01 * 0.6 * 0.6, eb = 0.01 * 0.8 * 0.8;
  EXPECT_NEAR(a.value(), -0.6 / (std::sqrt(ea) + 1e-5), 1e-9);
  EXPECT_NEAR(b.value(), -0.8 / (std::sqrt(eb) + 1e-5), 1e-9);
}

TEST(Rmsprop, ClipDisabledLeavesGradientAlone) {
  Tensor a = Tensor::scalar(0.0, true);
  a.grad()[0] = 100.0;
  Rmsprop opt({a}, 1.0, 0.99, 0.0);  // clip <= 0 disables
  opt.step();
  const double e = 0.01 * 100.0 * 100.0;
  EXPECT_NEAR(a.value(), -100.0 / (std::sqrt(e) + 1e-5), 1e-9);
}

TEST(Rmsprop, MovingAverageStaysNonNegative) {
  Tensor p = Tensor::scalar(1.0, true);
  Rmsprop opt({p}, 0.01);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    p.grad()[0] = rng.normal();
    opt.step();
    ASSERT_GE(opt.state()[0][0], 0.0);
  }
}

TEST(Rmsprop, RejectsUntrackedParameter) {
  Tensor p = Tensor::scalar(1.0, false);
  EXPECT_THROW(Rmsprop({p}, 0.1), std::runtime_error);
}

TEST(Rmsprop, DrivesQuadraticTowardMinimum) {
  Tensor x = Tensor::scalar(5.0, true);
  Rmsprop opt({x}, 0.05);
  for (int i = 0; i < 500; ++i) {
    Tensor loss = mul(x, x);
    loss.backward();
    opt.step();
  }
  EXPECT_LT(std::fabs(x.value()), 0.1);
}
