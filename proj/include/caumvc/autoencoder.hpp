#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "caumvc/cluster.hpp"
#include "caumvc/data.hpp"
#include "caumvc/mlp.hpp"
#include "caumvc/optim.hpp"
#include "caumvc/rng.hpp"
#include "caumvc/tensor.hpp"

namespace caumvc {

struct ViewAutoencoder {
  Mlp encoder;  // D_v -> h
  Mlp decoder;  // h -> D_v

  std::size_t latent_dim() const { return encoder.out_dim(); }
  std::size_t input_dim() const { return encoder.in_dim(); }

  friend bool operator==(const ViewAutoencoder&, const ViewAutoencoder&) = default;
};

/// D -> hidden (relu) -> h (identity) -> hidden (relu) -> D (identity).
inline ViewAutoencoder make_autoencoder(std::size_t input_dim, std::size_t hidden, std::size_t latent, Rng& rng) {
  const std::size_t enc[] = {input_dim, hidden, latent};
  const std::size_t dec[] = {latent, hidden, input_dim};
  ViewAutoencoder ae{Mlp::make(enc, Activation::kRelu, Activation::kIdentity, rng),
                     Mlp::make(dec, Activation::kRelu, Activation::kIdentity, rng)};
  return ae;
}

struct AeOutput {
  Matrix latent;
  Matrix recon;
};

struct AeCache {
  MlpCache encoder;
  MlpCache decoder;
};

inline AeOutput ae_forward(const Matrix& view, const ViewAutoencoder& ae, AeCache* cache = nullptr) {
  if (ae.encoder.out_dim() != ae.decoder.in_dim()) throw ShapeError("ae_forward: encoder/decoder latent widths differ");
  AeOutput out;
  out.latent = mlp_forward(view, ae.encoder, cache ? &cache->encoder : nullptr);
  out.recon = mlp_forward(out.latent, ae.decoder, cache ? &cache->decoder : nullptr);
  return out;
}

/// Sum over views of squared Frobenius norms of residuals.
inline double reconstruction_loss(std::span<const Matrix> views, std::span<const Matrix> recons) {
  if (views.size() != recons.size()) throw ShapeError("reconstruction_loss: view count mismatch");
  double total = 0.0;
  for (std::size_t v = 0; v < views.size(); ++v) {
    require_same_shape(views[v], recons[v], "reconstruction_loss");
    for (std::size_t i = 0; i < views[v].size(); ++i) {
      const double r = views[v].data()[i] - recons[v].data()[i];
      total += r * r;
    }
  }
  return total;
}

/// Per-view latents concatenated in view order: column block v is view v's latent.
struct VariantFeatures {
  Matrix matrix;
  std::size_t latent_dim = 0;

  std::size_t num_views() const { return latent_dim == 0 ? 0 : matrix.cols() / latent_dim; }
  Matrix view_block(std::size_t v) const { return slice_cols(matrix, v * latent_dim, latent_dim); }
};

inline VariantFeatures variant_features(const MultiViewDataset& ds, std::span<const ViewAutoencoder> aes) {
  if (aes.size() != ds.num_views()) {
    throw ShapeError("variant_features: " + std::to_string(aes.size()) + " autoencoders for " +
                     std::to_string(ds.num_views()) + " views");
  }
  std::vector<Matrix> latents;
  for (std::size_t v = 0; v < aes.size(); ++v) {
    if (v > 0 && aes[v].latent_dim() != aes[0].latent_dim()) throw ShapeError("variant_features: latent widths differ");
    latents.push_back(mlp_forward(ds.views[v], aes[v].encoder));
  }
  return VariantFeatures{hconcat(std::span<const Matrix>(latents)), aes.empty() ? 0 : aes[0].latent_dim()};
}

struct PretrainConfig {
  std::size_t epochs = 100;
  double lr = 0.003;
  std::size_t batch_size = 256;
  std::size_t hidden = 64;
  std::size_t latent_dim = 32;
  std::size_t k = 2;
  std::size_t kmeans_restarts = 10;
};

struct PretrainResult {
  std::vector<ViewAutoencoder> aes;
  VariantFeatures features;
  ClusterAssignment r_prime;
  Matrix centers;
  /// Full-dataset reconstruction loss after each epoch.
  std::vector<double> recon_history;
};

inline std::vector<std::span<double>> ae_parameters(std::vector<ViewAutoencoder>& aes) {
  std::vector<std::span<double>> out;
  for (auto& ae : aes) {
    for (auto s : ae.encoder.parameters()) out.push_back(s);
    for (auto s : ae.decoder.parameters()) out.push_back(s);
  }
  return out;
}

struct AeGrads {
  MlpGrads encoder;
  MlpGrads decoder;
};

/// Seeded shuffle of 0..n-1 split into batches; a trailing batch smaller than `min_batch` is dropped.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::size_t min_batch,
                                                          Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += batch_size) {
    const std::size_t e = std::min(n, b + batch_size);
    if (e - b < min_batch) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b), order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return batches;
}

inline double full_reconstruction_loss(const MultiViewDataset& ds, std::span<const ViewAutoencoder> aes) {
  std::vector<Matrix> recons;
  for (std::size_t v = 0; v < aes.size(); ++v) recons.push_back(ae_forward(ds.views[v], aes[v]).recon);
  return reconstruction_loss(ds.views, recons);
}

/// AE-only training on the reconstruction loss, then k-means on the variant features.
inline PretrainResult pretrain(const MultiViewDataset& ds, const PretrainConfig& cfg, std::uint64_t seed) {
  validate(ds);
  if (cfg.latent_dim == 0 || cfg.hidden == 0) throw ArgumentError("pretrain: dims must be >= 1");
  if (cfg.batch_size == 0) throw ArgumentError("pretrain: batch_size must be >= 1");
  PretrainResult res;
  Rng init(derive_seed(seed, SeedStream::kInit));
  for (std::size_t v = 0; v < ds.num_views(); ++v) {
    res.aes.push_back(make_autoencoder(ds.views[v].cols(), cfg.hidden, cfg.latent_dim, init));
  }

  auto params = ae_parameters(res.aes);
  AdamState adam = AdamState::for_params(params);
  Rng shuffle(derive_seed(seed, SeedStream::kPretrainShuffle));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : make_batches(ds.num_samples(), cfg.batch_size, 1, shuffle)) {
      std::vector<AeGrads> grads;
      for (std::size_t v = 0; v < ds.num_views(); ++v) {
        const auto& ae = res.aes[v];
        const Matrix x = select_rows(ds.views[v], batch);
        AeCache cache;
        const AeOutput out = ae_forward(x, ae, &cache);
        Matrix d_recon(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) d_recon.data()[i] = 2.0 * (out.recon.data()[i] - x.data()[i]);
        AeGrads g{MlpGrads::zeros_like(ae.encoder), MlpGrads::zeros_like(ae.decoder)};
        mlp_backward(cache.decoder, ae.decoder, d_recon, g.decoder);
        mlp_backward(cache.encoder, ae.encoder, g.decoder.input, g.encoder);
        grads.push_back(std::move(g));
      }
      std::vector<std::span<double>> gspans;
      for (auto& g : grads) {
        for (auto s : g.encoder.parameters()) gspans.push_back(s);
        for (auto s : g.decoder.parameters()) gspans.push_back(s);
      }
      adam_step(params, gspans, adam, cfg.lr);
    }
    res.recon_history.push_back(full_reconstruction_loss(ds, res.aes));
  }

  res.features = variant_features(ds, res.aes);
  KMeansOptions opt;
  opt.restarts = cfg.kmeans_restarts;
  KMeansResult km = kmeans(res.features.matrix, cfg.k, derive_seed(seed, SeedStream::kKmeans), opt);
  res.r_prime = std::move(km.assignment);
  res.centers = std::move(km.centers);
  return res;
}

}  // namespace caumvc
