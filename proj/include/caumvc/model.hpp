#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "caumvc/autoencoder.hpp"
#include "caumvc/causal_vae.hpp"
#include "caumvc/config.hpp"
#include "caumvc/contrastive.hpp"
#include "caumvc/data.hpp"
#include "caumvc/mlp.hpp"

namespace caumvc {

/// Everything a trained run needs for inference.
struct ModelState {
  Ablation ablation = Ablation::kFull;
  std::vector<ViewAutoencoder> aes;
  CausalModel causal;  // full / no_con
  Mlp direct_head;     // no_cau: x_va -> hidden -> k
  Matrix centers;      // pretrain k-means centers in the variant-feature space
  std::vector<int> r_prime;  // pretrain clustering of the training samples
  std::size_t k = 0;
  std::optional<FeatureRange> feature_range;

  /// Trainable arrays in a fixed order: AEs (encoder, decoder per view), then the branch
  /// selected by the ablation mode.
  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out = ae_parameters(aes);
    auto append = [&out](Mlp& net) {
      for (auto s : net.parameters()) out.push_back(s);
    };
    if (uses_causal_branch(ablation)) {
      append(causal.f_phi);
      append(causal.g_theta1);
      append(causal.g_theta2);
      append(causal.g_theta3);
    } else if (ablation == Ablation::kNoCau) {
      append(direct_head);
    }
    return out;
  }
};

struct ModelGrads {
  std::vector<AeGrads> aes;
  MlpGrads f_phi, g_theta1, g_theta2, g_theta3, direct_head;

  static ModelGrads zeros_like(const ModelState& s) {
    ModelGrads g;
    for (const auto& ae : s.aes) g.aes.push_back({MlpGrads::zeros_like(ae.encoder), MlpGrads::zeros_like(ae.decoder)});
    if (uses_causal_branch(s.ablation)) {
      g.f_phi = MlpGrads::zeros_like(s.causal.f_phi);
      g.g_theta1 = MlpGrads::zeros_like(s.causal.g_theta1);
      g.g_theta2 = MlpGrads::zeros_like(s.causal.g_theta2);
      g.g_theta3 = MlpGrads::zeros_like(s.causal.g_theta3);
    } else if (s.ablation == Ablation::kNoCau) {
      g.direct_head = MlpGrads::zeros_like(s.direct_head);
    }
    return g;
  }

  /// Same order as ModelState::parameters().
  std::vector<std::span<double>> parameters(Ablation ablation) {
    std::vector<std::span<double>> out;
    for (auto& a : aes) {
      for (auto s : a.encoder.parameters()) out.push_back(s);
      for (auto s : a.decoder.parameters()) out.push_back(s);
    }
    auto append = [&out](MlpGrads& g) {
      for (auto s : g.parameters()) out.push_back(s);
    };
    if (uses_causal_branch(ablation)) {
      append(f_phi);
      append(g_theta1);
      append(g_theta2);
      append(g_theta3);
    } else if (ablation == Ablation::kNoCau) {
      append(direct_head);
    }
    return out;
  }
};

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double anneal = 1.0;
};

/// Objective components. `elbo` is the negated ELBO (cross-entropy + anneal * KL); in
/// no_cau mode it holds the direct head's cross-entropy.
struct LossBreakdown {
  double recon = 0.0;
  double elbo = 0.0;
  double contrastive = 0.0;
  double kl = 0.0;
  double cross_entropy = 0.0;
  double total = 0.0;
};

/// L = L_R + alpha * L_ELBO + beta * L_C.
inline double total_loss(double l_r, double l_elbo, double l_c, double alpha, double beta) {
  return l_r + alpha * l_elbo + beta * l_c;
}

/// Beta actually applied for a mode; no_con and no_cau_con drop the contrastive term.
inline double effective_beta(Ablation a, double beta) {
  return a == Ablation::kFull ? beta : 0.0;
}

inline double effective_alpha(Ablation a, double alpha) {
  return a == Ablation::kNoCauCon ? 0.0 : alpha;
}

namespace detail {

/// Backpropagates the reparameterized draw mu + exp(log_sigma) * eps into the raw network
/// output [mu | log_sigma]. Clamped log-sigma entries pass no gradient.
inline Matrix gaussian_output_grad(const Matrix& raw_out, const GaussianParams& g, const Matrix& eps,
                                   const Matrix& d_sample, const Matrix* d_mu_extra, const Matrix* d_ls_extra) {
  const std::size_t w = g.mu.cols();
  Matrix d(raw_out.rows(), 2 * w);
  for (std::size_t i = 0; i < raw_out.rows(); ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double sigma = std::exp(g.log_sigma(i, j));
      double dmu = d_sample(i, j);
      double dls = d_sample(i, j) * sigma * eps(i, j);
      if (d_mu_extra) dmu += (*d_mu_extra)(i, j);
      if (d_ls_extra) dls += (*d_ls_extra)(i, j);
      const double raw_ls = raw_out(i, w + j);
      if (raw_ls < kLogSigmaMin || raw_ls > kLogSigmaMax) dls = 0.0;
      d(i, j) = dmu;
      d(i, w + j) = dls;
    }
  }
  return d;
}

}  // namespace detail

/// Objective on one batch, with gradients of every trainable array when `grads` is non-null.
/// `views` are the batch rows of each (normalized) view, `r_prime` the matching pretrain
/// assignment rows. Noise is supplied by the caller so the loss is a deterministic function.
inline LossBreakdown batch_objective(const ModelState& s, std::span<const Matrix> views, const ClusterAssignment& r_prime,
                                     const CausalNoise& noise, const LossWeights& w, ModelGrads* grads) {
  if (views.size() != s.aes.size()) throw ShapeError("batch_objective: view count != autoencoder count");
  const std::size_t n = views.front().rows();
  const double alpha = effective_alpha(s.ablation, w.alpha);
  const double beta = effective_beta(s.ablation, w.beta);

  LossBreakdown out;
  std::vector<AeCache> ae_caches(views.size());
  std::vector<AeOutput> ae_out(views.size());
  std::vector<Matrix> recons;
  std::vector<Matrix> latents;
  for (std::size_t v = 0; v < views.size(); ++v) {
    ae_out[v] = ae_forward(views[v], s.aes[v], grads ? &ae_caches[v] : nullptr);
    recons.push_back(ae_out[v].recon);
    latents.push_back(ae_out[v].latent);
  }
  out.recon = reconstruction_loss(views, recons);
  const Matrix x_va = hconcat(std::span<const Matrix>(latents));
  Matrix d_x_va(n, x_va.cols());

  if (uses_causal_branch(s.ablation)) {
    CausalCaches cc;
    const CausalPass p = causal_pass(r_prime, x_va, s.causal, noise, grads ? &cc : nullptr);
    out.cross_entropy = cross_entropy(r_prime.soft, p.pred.soft);
    out.kl = kl_to_standard_normal(p.q_in);
    out.elbo = out.cross_entropy + w.anneal * out.kl;
    std::optional<ContrastiveGrads> con;
    if (beta != 0.0) {
      con = contrastive_loss_with_grad(p.e_va_bar, p.e_in_bar);
      out.contrastive = con->loss;
    } else if (n >= 2) {
      // reported only; a zero representation row just means there is nothing to report
      try {
        out.contrastive = contrastive_loss(similarity_matrix(p.e_va_bar, p.e_in_bar));
      } catch (const DegenerateInputError&) {
        out.contrastive = 0.0;
      }
    }
    out.total = total_loss(out.recon, out.elbo, out.contrastive, alpha, beta);

    if (grads) {
      const std::size_t m = s.causal.representation_dim();
      const std::size_t d = s.causal.invariant_dim();
      Matrix d_logits = scaled(cross_entropy_logit_grad(r_prime.soft, p.pred.soft), alpha);
      mlp_backward(cc.g_theta3, s.causal.g_theta3, d_logits, grads->g_theta3);
      Matrix d_eva = slice_cols(grads->g_theta3.input, 0, m);
      Matrix d_ein = slice_cols(grads->g_theta3.input, m, m);
      if (con) {
        add_inplace(d_eva, con->d_va, beta);
        add_inplace(d_ein, con->d_in, beta);
      }

      const Matrix d_g1_out = detail::gaussian_output_grad(cc.g_theta1.pre_activations.back(), p.p_va,
                                                           noise.eps_va_mean, d_eva, nullptr, nullptr);
      mlp_backward(cc.g_theta1, s.causal.g_theta1, d_g1_out, grads->g_theta1);
      const Matrix d_g2_out = detail::gaussian_output_grad(cc.g_theta2.pre_activations.back(), p.p_in,
                                                           noise.eps_in_mean, d_ein, nullptr, nullptr);
      mlp_backward(cc.g_theta2, s.causal.g_theta2, d_g2_out, grads->g_theta2);

      add_inplace(d_x_va, slice_cols(grads->g_theta1.input, 0, x_va.cols()));
      Matrix d_x_in = slice_cols(grads->g_theta1.input, x_va.cols(), d);
      add_inplace(d_x_in, grads->g_theta2.input);

      // KL gradients: d/dmu = mu, d/dlog_sigma = sigma^2 - 1, weighted by alpha * anneal.
      const double kl_w = alpha * w.anneal;
      Matrix d_mu_kl(n, d), d_ls_kl(n, d);
      for (std::size_t i = 0; i < n * d; ++i) {
        d_mu_kl.data()[i] = kl_w * p.q_in.mu.data()[i];
        d_ls_kl.data()[i] = kl_w * (std::exp(2.0 * p.q_in.log_sigma.data()[i]) - 1.0);
      }
      const Matrix d_f_out = detail::gaussian_output_grad(cc.f_phi.pre_activations.back(), p.q_in, noise.eps_x_in,
                                                          d_x_in, &d_mu_kl, &d_ls_kl);
      mlp_backward(cc.f_phi, s.causal.f_phi, d_f_out, grads->f_phi);
      add_inplace(d_x_va, slice_cols(grads->f_phi.input, r_prime.soft.cols(), x_va.cols()));
    }
  } else if (s.ablation == Ablation::kNoCau) {
    MlpCache hc;
    const Matrix probs = softmax_rows(mlp_forward(x_va, s.direct_head, grads ? &hc : nullptr));
    out.cross_entropy = cross_entropy(r_prime.soft, probs);
    out.elbo = out.cross_entropy;
    out.total = total_loss(out.recon, out.elbo, 0.0, alpha, 0.0);
    if (grads) {
      mlp_backward(hc, s.direct_head, scaled(cross_entropy_logit_grad(r_prime.soft, probs), alpha), grads->direct_head);
      add_inplace(d_x_va, grads->direct_head.input);
    }
  } else {
    out.total = out.recon;
  }

  if (grads) {
    const std::size_t h = s.aes.front().latent_dim();
    for (std::size_t v = 0; v < views.size(); ++v) {
      Matrix d_recon(views[v].rows(), views[v].cols());
      for (std::size_t i = 0; i < d_recon.size(); ++i) {
        d_recon.data()[i] = 2.0 * (ae_out[v].recon.data()[i] - views[v].data()[i]);
      }
      mlp_backward(ae_caches[v].decoder, s.aes[v].decoder, d_recon, grads->aes[v].decoder);
      Matrix d_latent = grads->aes[v].decoder.input;
      add_inplace(d_latent, slice_cols(d_x_va, v * h, h));
      mlp_backward(ae_caches[v].encoder, s.aes[v].encoder, d_latent, grads->aes[v].encoder);
    }
  }
  return out;
}

}  // namespace caumvc
