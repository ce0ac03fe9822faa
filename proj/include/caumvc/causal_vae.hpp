#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "caumvc/autoencoder.hpp"
#include "caumvc/cluster.hpp"
#include "caumvc/error.hpp"
#include "caumvc/mlp.hpp"
#include "caumvc/rng.hpp"
#include "caumvc/tensor.hpp"

namespace caumvc {

inline constexpr double kLogSigmaMin = -8.0;
inline constexpr double kLogSigmaMax = 8.0;
inline constexpr double kProbFloor = 1e-12;

/// Factorized Gaussian: mean and clamped log standard deviation.
struct GaussianParams {
  Matrix mu;
  Matrix log_sigma;

  /// Splits an N x 2w network output into mean (first w columns) and log sigma.
  static GaussianParams from_network_output(const Matrix& out) {
    if (out.cols() % 2 != 0) throw ShapeError("GaussianParams: odd output width " + std::to_string(out.cols()));
    const std::size_t w = out.cols() / 2;
    GaussianParams g{slice_cols(out, 0, w), slice_cols(out, w, w)};
    for (double& v : g.log_sigma.data()) v = std::clamp(v, kLogSigmaMin, kLogSigmaMax);
    return g;
  }
};

/// Variational encoder and the three generative networks.
struct CausalModel {
  Mlp f_phi;     // [r' | x_va]   -> 2d
  Mlp g_theta1;  // [x_va | x_in] -> 2m
  Mlp g_theta2;  // x_in          -> 2m
  Mlp g_theta3;  // [e_va | e_in] -> k

  std::size_t invariant_dim() const { return f_phi.out_dim() / 2; }
  std::size_t representation_dim() const { return g_theta2.out_dim() / 2; }
  std::size_t num_clusters() const { return g_theta3.out_dim(); }
  std::size_t variant_width() const { return g_theta1.in_dim() - invariant_dim(); }

  friend bool operator==(const CausalModel&, const CausalModel&) = default;
};

struct CausalDims {
  std::size_t k = 2;
  std::size_t variant_width = 64;  // V * h
  std::size_t d = 16;
  std::size_t m = 32;
  std::size_t hidden = 64;
};

inline CausalModel make_causal_model(const CausalDims& dims, Rng& rng) {
  const std::size_t f[] = {dims.k + dims.variant_width, dims.hidden, 2 * dims.d};
  const std::size_t g1[] = {dims.variant_width + dims.d, dims.hidden, 2 * dims.m};
  const std::size_t g2[] = {dims.d, dims.hidden, 2 * dims.m};
  const std::size_t g3[] = {2 * dims.m, dims.hidden, dims.k};
  return CausalModel{Mlp::make(f, Activation::kRelu, Activation::kIdentity, rng),
                     Mlp::make(g1, Activation::kRelu, Activation::kIdentity, rng),
                     Mlp::make(g2, Activation::kRelu, Activation::kIdentity, rng),
                     Mlp::make(g3, Activation::kRelu, Activation::kIdentity, rng)};
}

/// Linear KL warm-up: min(1, epoch / (warm_fraction * total_epochs)).
struct AnnealSchedule {
  double warm_fraction = 0.2;
  std::size_t total_epochs = 0;

  double coefficient(std::size_t epoch) const {
    const double warm = warm_fraction * static_cast<double>(total_epochs);
    if (warm <= 0.0) return 1.0;
    return std::min(1.0, static_cast<double>(epoch) / warm);
  }
};

/// q(x_in | r', x_va).
inline GaussianParams encode_invariant(const ClusterAssignment& r_prime, const Matrix& x_va, const CausalModel& model,
                                       MlpCache* cache = nullptr) {
  if (r_prime.soft.rows() != x_va.rows()) throw ShapeError("encode_invariant: r' and x_va row counts differ");
  if (r_prime.soft.cols() + x_va.cols() != model.f_phi.in_dim()) {
    throw ShapeError("encode_invariant: input width " + std::to_string(r_prime.soft.cols() + x_va.cols()) +
                     " != encoder input " + std::to_string(model.f_phi.in_dim()));
  }
  return GaussianParams::from_network_output(mlp_forward(hconcat(r_prime.soft, x_va), model.f_phi, cache));
}

/// mu + exp(log_sigma) * eps.
inline Matrix sample_gaussian(const GaussianParams& params, const Matrix& eps) {
  require_same_shape(params.mu, params.log_sigma, "sample_gaussian");
  require_same_shape(params.mu, eps, "sample_gaussian");
  Matrix out(eps.rows(), eps.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = params.mu.data()[i] + std::exp(params.log_sigma.data()[i]) * eps.data()[i];
  }
  return out;
}

/// p(e_va | x_va, x_in).
inline GaussianParams decode_variant(const Matrix& x_va, const Matrix& x_in, const CausalModel& model,
                                     MlpCache* cache = nullptr) {
  if (x_in.cols() != model.invariant_dim()) throw ShapeError("decode_variant: x_in width != d");
  if (x_va.cols() + x_in.cols() != model.g_theta1.in_dim()) throw ShapeError("decode_variant: x_va width mismatch");
  return GaussianParams::from_network_output(mlp_forward(hconcat(x_va, x_in), model.g_theta1, cache));
}

/// p(e_in | x_in). Depends on nothing but x_in.
inline GaussianParams decode_invariant(const Matrix& x_in, const CausalModel& model, MlpCache* cache = nullptr) {
  if (x_in.cols() != model.invariant_dim()) throw ShapeError("decode_invariant: x_in width != d");
  return GaussianParams::from_network_output(mlp_forward(x_in, model.g_theta2, cache));
}

/// Average of `n_samples` standard-normal noise matrices; the mean reparameterized draw is
/// then mu + sigma * mean_eps.
inline Matrix mean_noise(std::size_t rows, std::size_t cols, std::size_t n_samples, Rng& rng) {
  if (n_samples == 0) throw ArgumentError("mc_mean_embed: n_samples must be >= 1");
  Matrix acc(rows, cols);
  for (std::size_t a = 0; a < n_samples; ++a) add_inplace(acc, rng.normal_matrix(rows, cols));
  if (n_samples > 1) {
    for (double& v : acc.data()) v /= static_cast<double>(n_samples);
  }
  return acc;
}

/// Mean of `n_samples` reparameterized draws.
inline Matrix mc_mean_embed(const GaussianParams& params, std::size_t n_samples, Rng& rng) {
  return sample_gaussian(params, mean_noise(params.mu.rows(), params.mu.cols(), n_samples, rng));
}

/// softmax(G_theta3([e_va | e_in])).
inline ClusterAssignment predict_clusters(const Matrix& e_va_bar, const Matrix& e_in_bar, const CausalModel& model,
                                          MlpCache* cache = nullptr) {
  require_same_shape(e_va_bar, e_in_bar, "predict_clusters");
  if (2 * e_va_bar.cols() != model.g_theta3.in_dim()) throw ShapeError("predict_clusters: representation width != m");
  return ClusterAssignment::from_soft(softmax_rows(mlp_forward(hconcat(e_va_bar, e_in_bar), model.g_theta3, cache)));
}

/// Sum over samples and dims of 0.5 (mu^2 + sigma^2 - 1 - 2 log sigma).
inline double kl_to_standard_normal(const GaussianParams& params) {
  require_same_shape(params.mu, params.log_sigma, "kl_to_standard_normal");
  double kl = 0.0;
  for (std::size_t i = 0; i < params.mu.size(); ++i) {
    const double mu = params.mu.data()[i];
    const double ls = params.log_sigma.data()[i];
    kl += 0.5 * (mu * mu + std::exp(2.0 * ls) - 1.0 - 2.0 * ls);
  }
  return kl;
}

/// -sum_i sum_c r'_ic log p_ic over the soft predictions (floored at 1e-12).
inline double cross_entropy(const Matrix& target, const Matrix& pred) {
  require_same_shape(target, pred, "cross_entropy");
  double ce = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = target.data()[i];
    if (t != 0.0) ce -= t * std::log(std::max(pred.data()[i], kProbFloor));
  }
  return ce;
}

/// d cross_entropy / d logits, consistent with the floor (floored entries contribute nothing).
inline Matrix cross_entropy_logit_grad(const Matrix& target, const Matrix& pred) {
  require_same_shape(target, pred, "cross_entropy_logit_grad");
  Matrix g(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    double wsum = 0.0;
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double w = pred(i, c) >= kProbFloor ? target(i, c) : 0.0;
      g(i, c) = -w;
      wsum += w;
    }
    for (std::size_t c = 0; c < pred.cols(); ++c) g(i, c) += pred(i, c) * wsum;
  }
  return g;
}

/// Negated ELBO: cross-entropy against r' plus the annealed KL term.
inline double elbo_loss(const ClusterAssignment& r_prime, const ClusterAssignment& soft_pred, double kl,
                        double anneal_coeff) {
  if (!(anneal_coeff >= 0.0 && anneal_coeff <= 1.0)) throw ArgumentError("elbo_loss: anneal_coeff must be in [0, 1]");
  require_same_shape(r_prime.soft, soft_pred.soft, "elbo_loss");
  return cross_entropy(r_prime.soft, soft_pred.soft) + anneal_coeff * kl;
}

/// Intermediate quantities of one pass through the causal branch.
struct CausalPass {
  GaussianParams q_in;
  Matrix x_in;
  GaussianParams p_va;
  GaussianParams p_in;
  Matrix e_va_bar;
  Matrix e_in_bar;
  ClusterAssignment pred;
};

/// Noise consumed by one causal pass: one draw of x_in and the averaged draws of e_va, e_in.
struct CausalNoise {
  Matrix eps_x_in;     // N x d
  Matrix eps_va_mean;  // N x m
  Matrix eps_in_mean;  // N x m

  static CausalNoise zeros(std::size_t n, std::size_t d, std::size_t m) { return {Matrix(n, d), Matrix(n, m), Matrix(n, m)}; }

  /// Draw order is fixed: x_in, then the e_va samples, then the e_in samples.
  static CausalNoise draw(std::size_t n, std::size_t d, std::size_t m, std::size_t n_samples, Rng& rng) {
    CausalNoise z;
    z.eps_x_in = rng.normal_matrix(n, d);
    z.eps_va_mean = mean_noise(n, m, n_samples, rng);
    z.eps_in_mean = mean_noise(n, m, n_samples, rng);
    return z;
  }
};

struct CausalCaches {
  MlpCache f_phi;
  MlpCache g_theta1;
  MlpCache g_theta2;
  MlpCache g_theta3;
};

inline CausalPass causal_pass(const ClusterAssignment& r_prime, const Matrix& x_va, const CausalModel& model,
                              const CausalNoise& noise, CausalCaches* caches = nullptr) {
  CausalPass p;
  p.q_in = encode_invariant(r_prime, x_va, model, caches ? &caches->f_phi : nullptr);
  p.x_in = sample_gaussian(p.q_in, noise.eps_x_in);
  p.p_va = decode_variant(x_va, p.x_in, model, caches ? &caches->g_theta1 : nullptr);
  p.p_in = decode_invariant(p.x_in, model, caches ? &caches->g_theta2 : nullptr);
  p.e_va_bar = sample_gaussian(p.p_va, noise.eps_va_mean);
  p.e_in_bar = sample_gaussian(p.p_in, noise.eps_in_mean);
  p.pred = predict_clusters(p.e_va_bar, p.e_in_bar, model, caches ? &caches->g_theta3 : nullptr);
  return p;
}

/// Cluster probabilities under the intervened variant features x'_va: invariant features are
/// drawn from q(x_in | r', x'_va) and pushed through both decoders and the cluster head.
inline CausalPass post_intervention_pass(const VariantFeatures& x_va_prime, const ClusterAssignment& r_prime,
                                         const CausalModel& model, std::size_t n_samples, Rng& rng) {
  if (x_va_prime.matrix.cols() != model.variant_width()) throw ShapeError("post_intervention_infer: x'_va width mismatch");
  const CausalNoise noise = CausalNoise::draw(x_va_prime.matrix.rows(), model.invariant_dim(), model.representation_dim(),
                                              n_samples, rng);
  return causal_pass(r_prime, x_va_prime.matrix, model, noise);
}

inline ClusterAssignment post_intervention_infer(const VariantFeatures& x_va_prime, const ClusterAssignment& r_prime,
                                                 const CausalModel& model, std::size_t n_samples, Rng& rng) {
  return post_intervention_pass(x_va_prime, r_prime, model, n_samples, rng).pred;
}

}  // namespace caumvc
