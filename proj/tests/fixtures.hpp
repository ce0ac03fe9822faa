#pragma once

#include <vector>

#include "caumvc/model.hpp"

namespace fixtures {

using namespace caumvc;

/// A tiny fully initialized model plus one batch, for gradient oracles.
struct SmallProblem {
  ModelState state;
  std::vector<Matrix> views;
  ClusterAssignment r_prime;
  CausalNoise noise;
};

inline SmallProblem small_problem(Ablation ablation, std::uint64_t seed, std::size_t n = 8) {
  constexpr std::size_t k = 3, h = 3, d = 2, m = 3, hidden = 5;
  const std::size_t dims[] = {4, 3, 5};
  Rng rng(seed);
  SmallProblem p;
  p.state.ablation = ablation;
  p.state.k = k;
  for (std::size_t dv : dims) {
    p.state.aes.push_back(make_autoencoder(dv, hidden, h, rng));
    p.views.push_back(rng.normal_matrix(n, dv));
  }
  p.state.causal = make_causal_model({k, 3 * h, d, m, hidden}, rng);
  const std::size_t head[] = {3 * h, hidden, k};
  p.state.direct_head = Mlp::make(head, Activation::kRelu, Activation::kIdentity, rng);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(rng.index(k));
  p.r_prime = ClusterAssignment::one_hot(labels, k);
  p.noise = CausalNoise::draw(n, d, m, 2, rng);
  // zero-initialized biases put ReLU units exactly on the kink; move every parameter off it
  ModelState all = p.state;
  for (Ablation mode : {Ablation::kFull, Ablation::kNoCau}) {
    all.ablation = mode;
    for (auto block : all.parameters()) {
      for (double& v : block) v += 0.1 * rng.normal();
    }
  }
  p.state.aes = all.aes;
  p.state.causal = all.causal;
  p.state.direct_head = all.direct_head;
  return p;
}

/// Worst relative error between the analytic gradient of batch_objective and central
/// finite differences over every trainable parameter of the mode.
inline double objective_grad_error(SmallProblem& p, const LossWeights& w, double fd_step = 1e-5) {
  auto params = p.state.parameters();
  auto loss = [&](std::vector<std::vector<double>>* grads) {
    if (!grads) return batch_objective(p.state, p.views, p.r_prime, p.noise, w, nullptr).total;
    ModelGrads g = ModelGrads::zeros_like(p.state);
    const double l = batch_objective(p.state, p.views, p.r_prime, p.noise, w, &g).total;
    grads->clear();
    for (auto s : g.parameters(p.state.ablation)) grads->emplace_back(s.begin(), s.end());
    return l;
  };
  return grad_check(loss, params, fd_step);
}

}  // namespace fixtures
