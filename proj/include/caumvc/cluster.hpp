#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <limits>
#include <tuple>
#include <vector>

#include "caumvc/error.hpp"
#include "caumvc/rng.hpp"
#include "caumvc/tensor.hpp"

namespace caumvc {

/// Row-stochastic soft assignment with its argmax labels.
struct ClusterAssignment {
  Matrix soft;              // N x k
  std::vector<int> hard;    // N

  std::size_t size() const { return hard.size(); }
  std::size_t num_clusters() const { return soft.cols(); }

  static ClusterAssignment from_soft(Matrix soft) {
    ClusterAssignment a;
    a.hard.resize(soft.rows());
    for (std::size_t i = 0; i < soft.rows(); ++i) a.hard[i] = static_cast<int>(argmax(soft.row(i)));
    a.soft = std::move(soft);
    return a;
  }

  static ClusterAssignment one_hot(const std::vector<int>& labels, std::size_t k) {
    ClusterAssignment a;
    a.hard = labels;
    a.soft = Matrix(labels.size(), k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
        throw ArgumentError("one_hot: label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(k) + ")");
      }
      a.soft(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return a;
  }

  ClusterAssignment rows(std::span<const std::size_t> idx) const {
    ClusterAssignment a;
    a.soft = select_rows(soft, idx);
    for (auto i : idx) a.hard.push_back(hard[i]);
    return a;
  }
};

/// Checks row sums within `tol` and that hard labels are the lowest-index argmax.
inline bool is_valid_assignment(const ClusterAssignment& a, double tol = 1e-6) {
  if (a.soft.rows() != a.hard.size()) return false;
  for (std::size_t i = 0; i < a.soft.rows(); ++i) {
    double sum = 0.0;
    for (double p : a.soft.row(i)) {
      if (p < 0.0 || p > 1.0 + tol) return false;
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol) return false;
    if (a.hard[i] != static_cast<int>(argmax(a.soft.row(i)))) return false;
  }
  return true;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

/// Nearest center per row (ties to the lowest index) and the resulting within-cluster SSE.
inline std::pair<std::vector<int>, double> assign_nearest(const Matrix& x, const Matrix& centers) {
  if (x.cols() != centers.cols()) throw ShapeError("assign_nearest: width " + shape_str(x) + " vs " + shape_str(centers));
  std::vector<int> labels(x.rows());
  double cost = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centers.rows(); ++c) {
      const double d = squared_distance(x.row(i), centers.row(c));
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    labels[i] = static_cast<int>(arg);
    cost += best;
  }
  return {std::move(labels), cost};
}

struct KMeansOptions {
  std::size_t max_iter = 100;
  double tol = 1e-6;
  /// Independent k-means++ starts; the one with the lowest final SSE wins.
  std::size_t restarts = 1;
};

struct KMeansResult {
  ClusterAssignment assignment;
  Matrix centers;
  double objective = 0.0;
  /// SSE after each assignment step of the winning run.
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
};

namespace detail {

inline Matrix kmeanspp_init(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centers(k, x.cols());
  const std::size_t first = rng.index(n);
  std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centers.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), centers.row(c)));
  }
  return centers;
}

inline KMeansResult lloyd(const Matrix& x, std::size_t k, Rng& rng, const KMeansOptions& opt) {
  const std::size_t n = x.rows();
  const std::size_t dim = x.cols();
  KMeansResult res;
  Matrix centers = kmeanspp_init(x, k, rng);
  std::vector<int> labels;
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    double cost = 0.0;
    std::tie(labels, cost) = assign_nearest(x, centers);
    res.objective_trace.push_back(cost);
    res.iterations = it + 1;

    Matrix next(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      ++counts[c];
      auto row = next.row(c);
      for (std::size_t j = 0; j < dim; ++j) row[j] += x(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = squared_distance(x.row(i), centers.row(static_cast<std::size_t>(labels[i])));
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        std::copy(x.row(far).begin(), x.row(far).end(), next.row(c).begin());
      } else {
        for (double& v : next.row(c)) v /= static_cast<double>(counts[c]);
      }
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(centers.row(c), next.row(c))));
    centers = std::move(next);
    if (shift < opt.tol) break;
  }
  auto [final_labels, final_cost] = assign_nearest(x, centers);
  res.objective = final_cost;
  res.centers = std::move(centers);
  res.assignment = ClusterAssignment::one_hot(final_labels, k);
  return res;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Hard labels are nearest-center assignments to
/// the returned centers; the soft form is one-hot.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& opt = {}) {
  if (k == 0) throw ArgumentError("kmeans: k must be >= 1");
  if (x.rows() < k) throw ArgumentError("kmeans: N=" + std::to_string(x.rows()) + " < k=" + std::to_string(k));
  KMeansResult best;
  const std::size_t restarts = std::max<std::size_t>(1, opt.restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(r == 0 ? seed : splitmix64(seed + r));
    KMeansResult res = detail::lloyd(x, k, rng, opt);
    if (r == 0 || res.objective < best.objective) best = std::move(res);
  }
  return best;
}

}  // namespace caumvc
