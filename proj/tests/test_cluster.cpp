#include <gtest/gtest.h>

#include "caumvc/cluster.hpp"
#include "caumvc/data.hpp"
#include "caumvc/metrics.hpp"

using namespace caumvc;

TEST(ClusterAssignment, FromSoftTiesLow) {
  const auto a = ClusterAssignment::from_soft(Matrix{{0.5, 0.5}, {0.2, 0.8}});
  EXPECT_EQ(a.hard, (std::vector<int>{0, 1}));
  EXPECT_TRUE(is_valid_assignment(a));
}

TEST(ClusterAssignment, OneHot) {
  const auto a = ClusterAssignment::one_hot({2, 0}, 3);
  EXPECT_EQ(a.soft, (Matrix{{0, 0, 1}, {1, 0, 0}}));
  EXPECT_THROW(ClusterAssignment::one_hot({3}, 3), ArgumentError);
  ClusterAssignment bad = a;
  bad.hard[0] = 1;
  EXPECT_FALSE(is_valid_assignment(bad));
}

TEST(KMeans, RepeatedPointsRecovered) {
  Matrix x(12, 2);
  const double centers[4][2] = {{0, 0}, {5, 5}, {-5, 5}, {5, -5}};
  std::vector<int> truth;
  for (std::size_t i = 0; i < 12; ++i) {
    x(i, 0) = centers[i % 4][0];
    x(i, 1) = centers[i % 4][1];
    truth.push_back(static_cast<int>(i % 4));
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto res = kmeans(x, 4, seed);
    EXPECT_DOUBLE_EQ(acc(truth, res.assignment.hard), 1.0);
    EXPECT_DOUBLE_EQ(res.objective, 0.0);
  }
}

TEST(KMeans, OneDimensional) {
  const Matrix x{{0}, {0}, {10}, {10}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = kmeans(x, 2, seed).assignment.hard;
    EXPECT_EQ(h[0], h[1]);
    EXPECT_EQ(h[2], h[3]);
    EXPECT_NE(h[0], h[2]);
  }
}

TEST(KMeans, SingleCluster) {
  const Matrix x{{1, 2}, {3, 4}, {5, 6}};
  const auto res = kmeans(x, 1, 0);
  EXPECT_EQ(res.assignment.hard, (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(res.centers, (Matrix{{3, 4}}));
}

TEST(KMeans, Errors) {
  EXPECT_THROW(kmeans(Matrix(2, 2), 3, 0), ArgumentError);
  EXPECT_THROW(kmeans(Matrix(2, 2), 0, 0), ArgumentError);
}

TEST(KMeans, ObjectiveNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MultiViewDataset ds = make_synthetic({.n = 300, .k = 6, .separation = 2.0, .noise = 1.0, .seed = seed});
    const auto res = kmeans(ds.views[0], 6, seed, {.max_iter = 100, .tol = 0.0});
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i) {
      EXPECT_LE(res.objective_trace[i], res.objective_trace[i - 1]);
    }
    EXPECT_LE(res.objective, res.objective_trace.back());
  }
}

TEST(KMeans, EmptyClusterReseeded) {
  // Five identical points and k = 2: one center must be re-seeded; result still valid.
  const Matrix x{{1, 1}, {1, 1}, {1, 1}, {1, 1}, {4, 4}};
  const auto res = kmeans(x, 2, 3);
  EXPECT_TRUE(is_valid_assignment(res.assignment));
  EXPECT_NE(res.assignment.hard[0], res.assignment.hard[4]);
}

TEST(KMeans, DeterministicAndRestartsHelp) {
  const MultiViewDataset ds = make_synthetic({.n = 200, .k = 5, .seed = 1});
  const auto a = kmeans(ds.views[0], 5, 7, {.restarts = 4});
  const auto b = kmeans(ds.views[0], 5, 7, {.restarts = 4});
  EXPECT_EQ(a.assignment.hard, b.assignment.hard);
  EXPECT_EQ(a.objective, b.objective);
  const auto single = kmeans(ds.views[0], 5, 7);
  EXPECT_LE(a.objective, single.objective);
}

TEST(AssignNearest, Basic) {
  const auto [labels, sse] = assign_nearest(Matrix{{0}, {9}, {4}}, Matrix{{0}, {10}});
  EXPECT_EQ(labels, (std::vector<int>{0, 1, 0}));
  EXPECT_DOUBLE_EQ(sse, 0 + 1 + 16);
}
