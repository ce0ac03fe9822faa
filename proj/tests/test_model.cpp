#include <gtest/gtest.h>

#include "caumvc/model.hpp"
#include "fixtures.hpp"

using namespace caumvc;
using fixtures::objective_grad_error;
using fixtures::small_problem;

TEST(TotalLoss, Examples) {
  EXPECT_EQ(total_loss(1.5, 2, 3, 0, 0), 1.5);
  EXPECT_DOUBLE_EQ(total_loss(1, 2, 3, 1, 1), 6.0);
  EXPECT_DOUBLE_EQ(total_loss(1, 2, 3, 0.01, 1), 4.02);
}

TEST(EffectiveWeights, PerMode) {
  EXPECT_EQ(effective_beta(Ablation::kFull, 2.0), 2.0);
  EXPECT_EQ(effective_beta(Ablation::kNoCon, 2.0), 0.0);
  EXPECT_EQ(effective_beta(Ablation::kNoCau, 2.0), 0.0);
  EXPECT_EQ(effective_beta(Ablation::kNoCauCon, 2.0), 0.0);
  EXPECT_EQ(effective_alpha(Ablation::kNoCau, 2.0), 2.0);
  EXPECT_EQ(effective_alpha(Ablation::kNoCauCon, 2.0), 0.0);
}

class ObjectiveGrad : public ::testing::TestWithParam<Ablation> {};

TEST_P(ObjectiveGrad, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto p = small_problem(GetParam(), seed);
    EXPECT_LT(objective_grad_error(p, {1.0, 1.0, 0.7}), 1e-4) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, ObjectiveGrad,
                         ::testing::Values(Ablation::kFull, Ablation::kNoCon, Ablation::kNoCau, Ablation::kNoCauCon));

TEST(ObjectiveGrad, UnequalWeights) {
  auto p = small_problem(Ablation::kFull, 4);
  EXPECT_LT(objective_grad_error(p, {0.3, 2.5, 0.2}), 1e-4);
}

TEST(Objective, ComponentsCombine) {
  auto p = small_problem(Ablation::kFull, 5);
  const LossWeights w{0.5, 2.0, 0.4};
  const LossBreakdown l = batch_objective(p.state, p.views, p.r_prime, p.noise, w, nullptr);
  EXPECT_DOUBLE_EQ(l.elbo, l.cross_entropy + 0.4 * l.kl);
  EXPECT_DOUBLE_EQ(l.total, total_loss(l.recon, l.elbo, l.contrastive, 0.5, 2.0));
  EXPECT_GT(l.contrastive, 0.0);
}

TEST(Objective, NoConGradientsIgnoreBeta) {
  auto p = small_problem(Ablation::kNoCon, 6);
  ModelGrads a = ModelGrads::zeros_like(p.state);
  ModelGrads b = ModelGrads::zeros_like(p.state);
  const auto la = batch_objective(p.state, p.views, p.r_prime, p.noise, {1.0, 1.0, 1.0}, &a);
  const auto lb = batch_objective(p.state, p.views, p.r_prime, p.noise, {1.0, 0.0, 1.0}, &b);
  EXPECT_EQ(la.total, lb.total);
  auto ga = a.parameters(Ablation::kNoCon);
  auto gb = b.parameters(Ablation::kNoCon);
  ASSERT_EQ(ga.size(), gb.size());
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_TRUE(std::equal(ga[i].begin(), ga[i].end(), gb[i].begin()));
  EXPECT_GT(la.contrastive, 0.0);  // still reported
}

TEST(Objective, NoCauConIsReconstructionOnly) {
  auto p = small_problem(Ablation::kNoCauCon, 7);
  const auto l = batch_objective(p.state, p.views, p.r_prime, p.noise, {1.0, 1.0, 1.0}, nullptr);
  EXPECT_EQ(l.total, l.recon);
}

TEST(Objective, ParameterOrderMatchesGradOrder) {
  for (Ablation a : {Ablation::kFull, Ablation::kNoCau, Ablation::kNoCauCon}) {
    auto p = small_problem(a, 8);
    ModelGrads g = ModelGrads::zeros_like(p.state);
    auto ps = p.state.parameters();
    auto gs = g.parameters(a);
    ASSERT_EQ(ps.size(), gs.size());
    for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i].size(), gs[i].size());
  }
}

TEST(Objective, ViewCountMismatch) {
  auto p = small_problem(Ablation::kFull, 9);
  p.views.pop_back();
  EXPECT_THROW(batch_objective(p.state, p.views, p.r_prime, p.noise, {}, nullptr), ShapeError);
}
