#include <gtest/gtest.h>

#include "caumvc/optim.hpp"

using namespace caumvc;

TEST(Adam, ZeroGradientKeepsParams) {
  std::vector<double> p{1.0, -2.0};
  std::vector<double> g{0.0, 0.0};
  std::vector<std::span<double>> ps{p}, gs{g};
  AdamState st = AdamState::for_params(ps);
  adam_step(ps, gs, st, 0.01);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(st.first[0], (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(st.second[0], (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLr) {
  std::vector<double> p{1.0};
  std::vector<double> g{1.0};
  std::vector<std::span<double>> ps{p}, gs{g};
  AdamState st = AdamState::for_params(ps);
  adam_step(ps, gs, st, 0.01);
  EXPECT_NEAR(p[0], 0.99, 1e-8);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    std::vector<double> p{0.3, 0.7};
    std::vector<std::span<double>> ps{p};
    AdamState st = AdamState::for_params(ps);
    for (int i = 0; i < 10; ++i) {
      std::vector<double> g{p[0] * 2.0, -p[1]};
      std::vector<std::span<double>> gs{g};
      adam_step(ps, gs, st, 0.05);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, Errors) {
  std::vector<double> p{1.0}, g{1.0, 2.0};
  std::vector<std::span<double>> ps{p}, gs{g};
  AdamState st = AdamState::for_params(ps);
  EXPECT_THROW(adam_step(ps, gs, st, 0.01), ShapeError);
  std::vector<std::span<double>> gs1{p};
  EXPECT_THROW(adam_step(ps, gs1, st, 0.0), ArgumentError);
}

TEST(Adam, MinimizesQuadratic) {
  std::vector<double> p{5.0};
  std::vector<std::span<double>> ps{p};
  AdamState st = AdamState::for_params(ps);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> g{2.0 * (p[0] - 1.0)};
    std::vector<std::span<double>> gs{g};
    adam_step(ps, gs, st, 0.05);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-3);
}

TEST(GradCheck, Quadratic) {
  std::vector<double> w{3.0};
  std::vector<std::span<double>> ps{w};
  auto f = [&](std::vector<std::vector<double>>* g) {
    if (g) *g = {{2.0 * w[0]}};
    return w[0] * w[0];
  };
  EXPECT_LT(grad_check(f, ps, 1e-5), 1e-8);
  EXPECT_EQ(w[0], 3.0);
}

TEST(GradCheck, ConstantLoss) {
  std::vector<double> w{1.0, 2.0};
  std::vector<std::span<double>> ps{w};
  auto f = [](std::vector<std::vector<double>>* g) {
    if (g) *g = {{0.0, 0.0}};
    return 4.0;
  };
  EXPECT_EQ(grad_check(f, ps, 1e-5), 0.0);
}

TEST(GradCheck, Errors) {
  std::vector<double> w{1.0};
  std::vector<std::span<double>> ps{w};
  auto nan_loss = [](std::vector<std::vector<double>>* g) {
    if (g) *g = {{0.0}};
    return std::nan("");
  };
  EXPECT_THROW(grad_check(nan_loss, ps, 1e-5), NumericError);
  auto ok = [](std::vector<std::vector<double>>* g) {
    if (g) *g = {{0.0}};
    return 0.0;
  };
  EXPECT_THROW(grad_check(ok, ps, 0.0), ArgumentError);
  EXPECT_THROW(grad_check(ok, ps, 1e-2), ArgumentError);
}

TEST(GradCheck, DetectsWrongGradient) {
  std::vector<double> w{2.0};
  std::vector<std::span<double>> ps{w};
  auto f = [&](std::vector<std::vector<double>>* g) {
    if (g) *g = {{w[0]}};  // should be 2w
    return w[0] * w[0];
  };
  EXPECT_GT(grad_check(f, ps, 1e-5), 0.4);
}
