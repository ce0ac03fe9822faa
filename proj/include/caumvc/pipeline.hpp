#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "caumvc/autoencoder.hpp"
#include "caumvc/causal_vae.hpp"
#include "caumvc/checkpoint.hpp"
#include "caumvc/cluster.hpp"
#include "caumvc/config.hpp"
#include "caumvc/data.hpp"
#include "caumvc/metrics.hpp"
#include "caumvc/model.hpp"
#include "caumvc/optim.hpp"

namespace caumvc {

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown loss;
  double anneal = 0.0;
  std::optional<MetricReport> metrics;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  TrainConfig config;  // with k resolved
  ModelState model;
  TrainHistory history;
  ClusterAssignment assignment;  // post-intervention output on the training data
  ClusterAssignment r_prime;
  std::vector<double> pretrain_recon;
};

inline std::size_t resolve_k(const TrainConfig& cfg, const MultiViewDataset& ds) {
  if (cfg.k > 0) return cfg.k;
  if (ds.labels) return ds.num_classes();
  throw ArgumentError("config: k = 0 requires labels to infer the cluster count");
}

inline MultiViewDataset normalized_for(const ModelState& s, const MultiViewDataset& ds) {
  return s.feature_range ? apply_feature_range(ds, *s.feature_range) : ds;
}

/// Deterministic forward on every sample: all noise fixed at zero.
inline ClusterAssignment deterministic_prediction(const ModelState& s, const MultiViewDataset& ds,
                                                  const ClusterAssignment& r_prime, LossBreakdown* loss,
                                                  const LossWeights& w) {
  const VariantFeatures xva = variant_features(ds, s.aes);
  if (loss) {
    const CausalNoise zero = CausalNoise::zeros(ds.num_samples(), s.causal.invariant_dim(), s.causal.representation_dim());
    *loss = batch_objective(s, ds.views, r_prime, zero, w, nullptr);
  }
  if (uses_causal_branch(s.ablation)) {
    const CausalNoise zero = CausalNoise::zeros(ds.num_samples(), s.causal.invariant_dim(), s.causal.representation_dim());
    return causal_pass(r_prime, xva.matrix, s.causal, zero).pred;
  }
  if (s.ablation == Ablation::kNoCau) return ClusterAssignment::from_soft(softmax_rows(mlp_forward(xva.matrix, s.direct_head)));
  return ClusterAssignment::one_hot(assign_nearest(xva.matrix, s.centers).first, s.k);
}

/// r' for a sample set: the stored pretrain clustering when the set is the training set
/// (same N, view-0 order), otherwise nearest pretrain center of the variant features.
inline ClusterAssignment conditioning_assignment(const ModelState& s, const VariantFeatures& xva) {
  if (xva.matrix.rows() == s.r_prime.size()) return ClusterAssignment::one_hot(s.r_prime, s.k);
  return ClusterAssignment::one_hot(assign_nearest(xva.matrix, s.centers).first, s.k);
}

/// Cluster assignment for already-normalized data, following the model's ablation mode.
inline ClusterAssignment infer_normalized(const ModelState& s, const MultiViewDataset& ds, const TrainConfig& cfg) {
  const VariantFeatures xva = variant_features(ds, s.aes);
  switch (s.ablation) {
    case Ablation::kFull:
    case Ablation::kNoCon: {
      Rng rng(derive_seed(cfg.seed, SeedStream::kInfer));
      return post_intervention_infer(xva, conditioning_assignment(s, xva), s.causal, cfg.mc_samples_infer, rng);
    }
    case Ablation::kNoCau:
      return ClusterAssignment::from_soft(softmax_rows(mlp_forward(xva.matrix, s.direct_head)));
    case Ablation::kNoCauCon:
      break;
  }
  return ClusterAssignment::one_hot(assign_nearest(xva.matrix, s.centers).first, s.k);
}

inline std::string describe(const LossBreakdown& l) {
  std::ostringstream os;
  os << "total=" << l.total << " l_r=" << l.recon << " l_elbo=" << l.elbo << " l_c=" << l.contrastive << " kl=" << l.kl;
  return os.str();
}

/// Shuffles views 1.. of a random subset of batch rows among themselves (a cyclic
/// derangement per view), leaving view 0 and hence r' in place. Needs >= 2 chosen rows.
inline void simulate_intervention(std::vector<Matrix>& views, double fraction, Rng& rng) {
  if (fraction <= 0.0 || views.size() < 2) return;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < views.front().rows(); ++i) {
    if (rng.uniform() < fraction) chosen.push_back(i);
  }
  if (chosen.size() < 2) return;
  for (std::size_t v = 1; v < views.size(); ++v) {
    rng.shuffle(std::span<std::size_t>(chosen));
    const Matrix src = views[v];
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      const auto from = src.row(chosen[(j + 1) % chosen.size()]);
      std::copy(from.begin(), from.end(), views[v].row(chosen[j]).begin());
    }
  }
}

/// Pretrain (AEs + k-means r'), then joint optimization of L_R + alpha L_ELBO + beta L_C.
inline TrainResult train(const MultiViewDataset& raw, const TrainConfig& config) {
  validate(raw);
  validate(config);
  TrainResult res;
  res.config = config;
  res.config.k = resolve_k(config, raw);
  const TrainConfig& cfg = res.config;
  if (raw.num_samples() < cfg.k) throw ArgumentError("train: fewer samples than clusters");

  ModelState& s = res.model;
  s.ablation = cfg.ablation;
  s.k = cfg.k;
  if (cfg.normalize) s.feature_range = feature_range(raw);
  const MultiViewDataset ds = normalized_for(s, raw);

  PretrainConfig pc;
  pc.epochs = cfg.pretrain_epochs;
  pc.lr = cfg.lr;
  pc.batch_size = cfg.batch_size;
  pc.hidden = cfg.hidden;
  pc.latent_dim = cfg.h;
  pc.k = cfg.k;
  pc.kmeans_restarts = cfg.kmeans_restarts;
  PretrainResult pre = pretrain(ds, pc, cfg.seed);
  res.pretrain_recon = pre.recon_history;
  res.r_prime = pre.r_prime;
  s.aes = std::move(pre.aes);
  s.centers = std::move(pre.centers);
  s.r_prime = pre.r_prime.hard;

  Rng init(derive_seed(cfg.seed, SeedStream::kInit, 1));
  const std::size_t variant_width = ds.num_views() * cfg.h;
  if (uses_causal_branch(s.ablation)) {
    s.causal = make_causal_model({cfg.k, variant_width, cfg.d, cfg.m, cfg.hidden}, init);
  } else if (s.ablation == Ablation::kNoCau) {
    const std::size_t widths[] = {variant_width, cfg.hidden, cfg.k};
    s.direct_head = Mlp::make(widths, Activation::kRelu, Activation::kIdentity, init);
  }

  if (s.ablation != Ablation::kNoCauCon && cfg.epochs > 0) {
    auto params = s.parameters();
    AdamState adam = AdamState::for_params(params);
    const AnnealSchedule schedule{cfg.warm_fraction, cfg.epochs};
    Rng shuffle(derive_seed(cfg.seed, SeedStream::kTrainShuffle));
    Rng noise_rng(derive_seed(cfg.seed, SeedStream::kTrainNoise));
    Rng intervene(derive_seed(cfg.seed, SeedStream::kTrainIntervention));
    const bool causal = uses_causal_branch(s.ablation);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      const LossWeights w{cfg.alpha, cfg.beta, schedule.coefficient(epoch)};
      const auto batches = make_batches(ds.num_samples(), cfg.batch_size, 2, shuffle);
      for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto& idx = batches[b];
        std::vector<Matrix> views;
        for (const auto& v : ds.views) views.push_back(select_rows(v, idx));
        if (causal) simulate_intervention(views, cfg.intervention_fraction, intervene);
        const ClusterAssignment rp = res.r_prime.rows(idx);
        const CausalNoise noise = causal ? CausalNoise::draw(idx.size(), cfg.d, cfg.m, cfg.mc_samples_train, noise_rng)
                                         : CausalNoise::zeros(idx.size(), cfg.d, cfg.m);
        ModelGrads grads = ModelGrads::zeros_like(s);
        const LossBreakdown loss = batch_objective(s, views, rp, noise, w, &grads);
        if (!std::isfinite(loss.total)) {
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                             ": " + describe(loss));
        }
        auto gspans = grads.parameters(s.ablation);
        adam_step(params, gspans, adam, cfg.lr);
      }

      EpochRecord rec;
      rec.epoch = epoch;
      rec.anneal = w.anneal;
      const ClusterAssignment pred = deterministic_prediction(s, ds, res.r_prime, &rec.loss, w);
      if (!std::isfinite(rec.loss.total)) {
        throw NumericError("train: non-finite full-data loss after epoch " + std::to_string(epoch) + ": " + describe(rec.loss));
      }
      if (ds.labels) rec.metrics = metric_report(*ds.labels, pred.hard);
      res.history.epochs.push_back(rec);
    }
  }

  res.assignment = infer_normalized(s, ds, cfg);
  return res;
}

inline void check_compatible(const ModelState& s, const MultiViewDataset& ds) {
  if (s.aes.size() != ds.num_views()) {
    throw CheckpointError("checkpoint has " + std::to_string(s.aes.size()) + " views, dataset has " +
                          std::to_string(ds.num_views()));
  }
  for (std::size_t v = 0; v < s.aes.size(); ++v) {
    if (s.aes[v].input_dim() != ds.views[v].cols()) {
      throw CheckpointError("view " + std::to_string(v) + ": checkpoint expects " + std::to_string(s.aes[v].input_dim()) +
                            " features, dataset has " + std::to_string(ds.views[v].cols()));
    }
  }
}

inline ClusterAssignment infer(const Checkpoint& ck, const MultiViewDataset& raw) {
  validate(raw);
  check_compatible(ck.model, raw);
  return infer_normalized(ck.model, normalized_for(ck.model, raw), ck.config);
}

inline MetricReport evaluate(const ClusterAssignment& pred, const std::optional<std::vector<int>>& labels) {
  if (!labels) throw ArgumentError("evaluate: dataset has no labels");
  return metric_report(*labels, pred.hard);
}

struct SweepRow {
  double ratio = 1.0;
  MetricReport report;
};

/// Trains once on `ds`, then for each ratio shifts the data with a derived seed and runs
/// post-intervention inference on the shifted views.
inline std::vector<SweepRow> ratio_sweep(const MultiViewDataset& ds, std::span<const double> ratios, const TrainConfig& cfg) {
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ArgumentError("ratio_sweep: ratio " + format_double(r) + " outside [0, 1]");
  }
  const TrainResult run = train(ds, cfg);
  const Checkpoint ck{run.config, run.model};
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const auto [shifted, map] = inject_misalignment(ds, ratios[i], derive_seed(cfg.seed, SeedStream::kSweep, i));
    rows.push_back({ratios[i], evaluate(infer(ck, shifted), shifted.labels)});
  }
  return rows;
}

struct AblationRow {
  Ablation mode = Ablation::kFull;
  MetricReport report;
};

inline constexpr Ablation kAblationModes[] = {Ablation::kFull, Ablation::kNoCau, Ablation::kNoCon, Ablation::kNoCauCon};

/// Every mode is trained on `ds` with the same seed and evaluated on one shared shifted copy.
inline std::vector<AblationRow> ablate(const MultiViewDataset& ds, const TrainConfig& cfg, double ratio) {
  const auto [shifted, map] = inject_misalignment(ds, ratio, derive_seed(cfg.seed, SeedStream::kInject));
  std::vector<AblationRow> rows;
  for (Ablation mode : kAblationModes) {
    TrainConfig c = cfg;
    c.ablation = mode;
    const TrainResult run = train(ds, c);
    rows.push_back({mode, evaluate(infer(Checkpoint{run.config, run.model}, shifted), shifted.labels)});
  }
  return rows;
}

/// Rows of [e_va_bar | e_in_bar | hard label] from the post-intervention pass.
inline Matrix embeddings(const Checkpoint& ck, const MultiViewDataset& raw) {
  validate(raw);
  check_compatible(ck.model, raw);
  if (!uses_causal_branch(ck.model.ablation)) throw ArgumentError("export-embeddings: model has no causal branch");
  const MultiViewDataset ds = normalized_for(ck.model, raw);
  const VariantFeatures xva = variant_features(ds, ck.model.aes);
  Rng rng(derive_seed(ck.config.seed, SeedStream::kInfer));
  const CausalPass p = post_intervention_pass(xva, conditioning_assignment(ck.model, xva), ck.model.causal,
                                              ck.config.mc_samples_infer, rng);
  const std::size_t m = p.e_va_bar.cols();
  Matrix out(ds.num_samples(), 2 * m + 1);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      out(i, j) = p.e_va_bar(i, j);
      out(i, m + j) = p.e_in_bar(i, j);
    }
    out(i, 2 * m) = static_cast<double>(p.pred.hard[i]);
  }
  return out;
}

inline void export_embeddings(const Checkpoint& ck, const MultiViewDataset& raw, const std::filesystem::path& path) {
  write_csv_matrix(path, embeddings(ck, raw));
}

// ---- output files --------------------------------------------------------------------

inline std::string format_metrics(const MetricReport& r) {
  std::ostringstream os;
  os << "acc = " << format_double(r.acc) << '\n'
     << "nmi = " << format_double(r.nmi) << '\n'
     << "pur = " << format_double(r.pur) << '\n'
     << "n = " << r.n << '\n'
     << "k_true = " << r.k_true << '\n'
     << "k_pred = " << r.k_pred << '\n';
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

/// Metrics first, then the config echo, as flat `key = value` lines.
inline void write_metrics_file(const std::filesystem::path& path, const MetricReport& r, const TrainConfig& cfg) {
  write_text(path, format_metrics(r) + format_config(cfg));
}

inline std::string format_history(const TrainHistory& h) {
  std::ostringstream os;
  os << "epoch,total,l_r,l_elbo,l_c,kl,anneal,acc,nmi,pur\n";
  for (const auto& e : h.epochs) {
    os << e.epoch << ',' << format_double(e.loss.total) << ',' << format_double(e.loss.recon) << ','
       << format_double(e.loss.elbo) << ',' << format_double(e.loss.contrastive) << ',' << format_double(e.loss.kl) << ','
       << format_double(e.anneal) << ',';
    if (e.metrics) {
      os << format_double(e.metrics->acc) << ',' << format_double(e.metrics->nmi) << ',' << format_double(e.metrics->pur);
    } else {
      os << ",,";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace caumvc
