#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "caumvc/error.hpp"
#include "caumvc/tensor.hpp"

namespace caumvc {

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with potentials, O(k^3)).
inline Assignment hungarian_min_cost(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ShapeError("hungarian_min_cost: cost must be square, got " + shape_str(cost));
  if (!cost.all_finite()) throw ArgumentError("hungarian_min_cost: non-finite cost");
  const std::size_t n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j, column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.column_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) a.column_of_row[p[j] - 1] = j - 1;
  }
  for (std::size_t i = 0; i < n; ++i) a.cost += cost(i, a.column_of_row[i]);
  return a;
}

namespace detail {

inline std::size_t label_count(std::span<const int> labels) {
  int mx = -1;
  for (int l : labels) {
    if (l < 0) throw ArgumentError("metrics: negative label");
    mx = std::max(mx, l);
  }
  return static_cast<std::size_t>(mx + 1);
}

/// rows: true class, cols: predicted cluster.
inline Matrix contingency(std::span<const int> truth, std::span<const int> pred, std::size_t rows, std::size_t cols) {
  if (truth.size() != pred.size()) {
    throw ShapeError("metrics: label lengths differ (" + std::to_string(truth.size()) + " vs " +
                     std::to_string(pred.size()) + ")");
  }
  Matrix c(rows, cols);
  for (std::size_t i = 0; i < truth.size(); ++i) c(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i])) += 1.0;
  return c;
}

inline void require_nonempty(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) {
    throw ShapeError("metrics: label lengths differ (" + std::to_string(truth.size()) + " vs " +
                     std::to_string(pred.size()) + ")");
  }
  if (truth.empty()) throw ArgumentError("metrics: empty labelings");
}

}  // namespace detail

/// Best one-to-one relabeling accuracy. Unequal cluster counts are padded to square with zeros.
inline double acc(std::span<const int> truth, std::span<const int> pred) {
  detail::require_nonempty(truth, pred);
  const std::size_t k = std::max(detail::label_count(truth), detail::label_count(pred));
  const Matrix counts = detail::contingency(truth, pred, k, k);
  double mx = 0.0;
  for (double c : counts.data()) mx = std::max(mx, c);
  Matrix cost(k, k);
  for (std::size_t i = 0; i < counts.size(); ++i) cost.data()[i] = mx - counts.data()[i];
  const Assignment a = hungarian_min_cost(cost);
  double matched = 0.0;
  for (std::size_t i = 0; i < k; ++i) matched += counts(i, a.column_of_row[i]);
  return matched / static_cast<double>(truth.size());
}

/// MI / sqrt(H(truth) H(pred)), natural logs.
inline double nmi(std::span<const int> truth, std::span<const int> pred) {
  detail::require_nonempty(truth, pred);
  const std::size_t kt = detail::label_count(truth);
  const std::size_t kp = detail::label_count(pred);
  const Matrix counts = detail::contingency(truth, pred, kt, kp);
  const double n = static_cast<double>(truth.size());
  std::vector<double> rt(kt, 0.0), rp(kp, 0.0);
  for (std::size_t i = 0; i < kt; ++i) {
    for (std::size_t j = 0; j < kp; ++j) {
      rt[i] += counts(i, j);
      rp[j] += counts(i, j);
    }
  }
  auto entropy = [n](const std::vector<double>& marg) {
    double h = 0.0;
    for (double c : marg) {
      if (c > 0.0) h -= (c / n) * std::log(c / n);
    }
    return h;
  };
  const double ht = entropy(rt);
  const double hp = entropy(rp);
  if (ht == 0.0 || hp == 0.0) return (ht == 0.0 && hp == 0.0) ? 1.0 : 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < kt; ++i) {
    for (std::size_t j = 0; j < kp; ++j) {
      const double c = counts(i, j);
      if (c > 0.0) mi += (c / n) * std::log(c * n / (rt[i] * rp[j]));
    }
  }
  return std::clamp(mi / std::sqrt(ht * hp), 0.0, 1.0);
}

/// Fraction of samples in the majority true class of their predicted cluster.
inline double purity(std::span<const int> truth, std::span<const int> pred) {
  detail::require_nonempty(truth, pred);
  const std::size_t kt = detail::label_count(truth);
  const std::size_t kp = detail::label_count(pred);
  const Matrix counts = detail::contingency(truth, pred, kt, kp);
  double total = 0.0;
  for (std::size_t j = 0; j < kp; ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < kt; ++i) best = std::max(best, counts(i, j));
    total += best;
  }
  return total / static_cast<double>(truth.size());
}

struct MetricReport {
  double acc = 0.0;
  double nmi = 0.0;
  double pur = 0.0;
  std::size_t n = 0;
  std::size_t k_true = 0;
  std::size_t k_pred = 0;
};

inline MetricReport metric_report(std::span<const int> truth, std::span<const int> pred) {
  MetricReport r;
  r.acc = acc(truth, pred);
  r.nmi = nmi(truth, pred);
  r.pur = purity(truth, pred);
  r.n = truth.size();
  std::vector<int> t(truth.begin(), truth.end()), p(pred.begin(), pred.end());
  std::sort(t.begin(), t.end());
  std::sort(p.begin(), p.end());
  r.k_true = static_cast<std::size_t>(std::unique(t.begin(), t.end()) - t.begin());
  r.k_pred = static_cast<std::size_t>(std::unique(p.begin(), p.end()) - p.begin());
  return r;
}

}  // namespace caumvc
