#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "caumvc/error.hpp"

namespace caumvc {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;

  static AdamState for_params(std::span<const std::span<double>> params) {
    AdamState s;
    for (const auto& p : params) {
      s.first.emplace_back(p.size(), 0.0);
      s.second.emplace_back(p.size(), 0.0);
    }
    return s;
  }
};

/// In-place Adam update with bias correction.
inline void adam_step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads,
                      AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ArgumentError("adam_step: lr must be > 0");
  if (params.size() != grads.size() || params.size() != state.first.size() ||
      params.size() != state.second.size()) {
    throw ShapeError("adam_step: parameter/gradient/state block counts differ");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.first[b].size() ||
        params[b].size() != state.second[b].size()) {
      throw ShapeError("adam_step: block " + std::to_string(b) + " size mismatch");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first[b];
    auto& v = state.second[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      params[b][i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

/// Evaluates the loss at the current parameter values. When `grads` is non-null it must
/// also be filled with the analytic gradient, one vector per parameter block.
using LossWithGrad = std::function<double(std::vector<std::vector<double>>* grads)>;

/// Max over every parameter of |analytic - central FD| / max(1, |analytic|, |FD|).
/// Parameters are restored to their original values before returning.
inline double grad_check(const LossWithGrad& loss_fn, std::span<const std::span<double>> params, double fd_step) {
  if (!(fd_step > 0.0 && fd_step <= 1e-3)) throw ArgumentError("grad_check: fd_step must be in (0, 1e-3]");
  std::vector<std::vector<double>> analytic;
  const double base = loss_fn(&analytic);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss at base point");
  if (analytic.size() != params.size()) throw ShapeError("grad_check: gradient block count mismatch");

  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (analytic[b].size() != params[b].size()) throw ShapeError("grad_check: gradient block size mismatch");
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      double& p = params[b][i];
      const double saved = p;
      p = saved + fd_step;
      const double up = loss_fn(nullptr);
      p = saved - fd_step;
      const double down = loss_fn(nullptr);
      p = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("grad_check: non-finite loss under perturbation");
      const double fd = (up - down) / (2.0 * fd_step);
      const double a = analytic[b][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(fd)});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  return worst;
}

}  // namespace caumvc
