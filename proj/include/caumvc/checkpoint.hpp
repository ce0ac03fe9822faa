#pragma once

// Checkpoint layout (all integers little-endian):
//
//   magic        8 bytes  "CAUMVCKP"
//   version      u32      currently 1
//   entry_count  u32
//   entry_count times:
//     name_len   u32
//     name       name_len bytes (ASCII)
//     rows       u64
//     cols       u64
//     values     rows * cols IEEE-754 float64, row-major
//
// Every quantity, including integers such as dims and labels, is stored as a float64 array.
// Entries are written in a fixed order, so identical models produce identical files.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "caumvc/config.hpp"
#include "caumvc/error.hpp"
#include "caumvc/model.hpp"

namespace caumvc {

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'U', 'M', 'V', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Matrix values;
};

struct Checkpoint {
  TrainConfig config;
  ModelState model;
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw CheckpointError("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

inline Matrix scalar(double v) { return Matrix(1, 1, v); }

inline Matrix vector_row(const std::vector<double>& v) { return Matrix(1, v.size(), v); }

inline double activation_code(Activation a) { return static_cast<double>(static_cast<int>(a)); }

inline void push_mlp(std::vector<NamedArray>& out, const std::string& prefix, const Mlp& net) {
  out.push_back({prefix + ".layers", scalar(static_cast<double>(net.layers().size()))});
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    const std::string p = prefix + "." + std::to_string(l);
    out.push_back({p + ".weight", layer.weight});
    out.push_back({p + ".bias", vector_row(layer.bias)});
    out.push_back({p + ".activation", scalar(activation_code(layer.activation))});
  }
}

class ArrayTable {
 public:
  explicit ArrayTable(std::vector<NamedArray> arrays) {
    for (auto& a : arrays) table_[a.name] = std::move(a.values);
  }

  bool has(const std::string& name) const { return table_.count(name) != 0; }

  const Matrix& at(const std::string& name) const {
    auto it = table_.find(name);
    if (it == table_.end()) throw CheckpointError("checkpoint: missing entry '" + name + "'");
    return it->second;
  }

  double scalar(const std::string& name) const {
    const Matrix& m = at(name);
    if (m.size() != 1) throw CheckpointError("checkpoint: entry '" + name + "' is not a scalar");
    return m.data()[0];
  }

  std::size_t count(const std::string& name) const {
    const double v = scalar(name);
    if (v < 0.0 || v != std::floor(v)) throw CheckpointError("checkpoint: entry '" + name + "' is not a count");
    return static_cast<std::size_t>(v);
  }

  Mlp mlp(const std::string& prefix) const {
    std::vector<DenseLayer> layers;
    const std::size_t n = count(prefix + ".layers");
    for (std::size_t l = 0; l < n; ++l) {
      const std::string p = prefix + "." + std::to_string(l);
      DenseLayer layer;
      layer.weight = at(p + ".weight");
      layer.bias = at(p + ".bias").data();
      const int act = static_cast<int>(scalar(p + ".activation"));
      if (act < 0 || act > 2) throw CheckpointError("checkpoint: bad activation code in " + p);
      layer.activation = static_cast<Activation>(act);
      layers.push_back(std::move(layer));
    }
    try {
      return Mlp(std::move(layers));
    } catch (const ShapeError& e) {
      throw CheckpointError(std::string("checkpoint: ") + prefix + ": " + e.what());
    }
  }

 private:
  std::map<std::string, Matrix> table_;
};

}  // namespace detail

inline void write_named_arrays(std::ostream& out, const std::vector<NamedArray>& arrays) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    detail::put_le<std::uint64_t>(out, a.values.rows());
    detail::put_le<std::uint64_t>(out, a.values.cols());
    for (double v : a.values.data()) detail::put_le<double>(out, v);
  }
}

inline std::vector<NamedArray> read_named_arrays(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError("checkpoint: bad magic");
  }
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(in);
  std::vector<NamedArray> arrays;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = detail::get_le<std::uint32_t>(in);
    if (len > 4096) throw CheckpointError("checkpoint: implausible name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("checkpoint: truncated name");
    const auto rows = detail::get_le<std::uint64_t>(in);
    const auto cols = detail::get_le<std::uint64_t>(in);
    // corrupt headers should fail cleanly, not attempt a giant allocation
    if (rows > (1ULL << 28) || cols > (1ULL << 28) || rows * cols > (1ULL << 28)) {
      throw CheckpointError("checkpoint: implausible array shape for '" + name + "'");
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) v = detail::get_le<double>(in);
    arrays.push_back({std::move(name), Matrix(rows, cols, std::move(values))});
  }
  return arrays;
}

inline std::vector<NamedArray> checkpoint_arrays(const Checkpoint& ck) {
  using detail::scalar;
  const TrainConfig& c = ck.config;
  const ModelState& s = ck.model;
  std::vector<NamedArray> out;
  out.push_back({"config.alpha", scalar(c.alpha)});
  out.push_back({"config.beta", scalar(c.beta)});
  out.push_back({"config.lr", scalar(c.lr)});
  out.push_back({"config.epochs", scalar(static_cast<double>(c.epochs))});
  out.push_back({"config.batch_size", scalar(static_cast<double>(c.batch_size))});
  out.push_back({"config.h", scalar(static_cast<double>(c.h))});
  out.push_back({"config.d", scalar(static_cast<double>(c.d))});
  out.push_back({"config.m", scalar(static_cast<double>(c.m))});
  out.push_back({"config.k", scalar(static_cast<double>(c.k))});
  out.push_back({"config.warm_fraction", scalar(c.warm_fraction)});
  out.push_back({"config.mc_samples_train", scalar(static_cast<double>(c.mc_samples_train))});
  out.push_back({"config.mc_samples_infer", scalar(static_cast<double>(c.mc_samples_infer))});
  // Seeds are 64-bit; stored as hi/lo 32-bit halves to stay exact in a double.
  out.push_back({"config.seed", Matrix(1, 2, {static_cast<double>(c.seed >> 32), static_cast<double>(c.seed & 0xFFFFFFFFULL)})});
  out.push_back({"config.ablation", scalar(static_cast<double>(static_cast<int>(c.ablation)))});
  out.push_back({"config.pretrain_epochs", scalar(static_cast<double>(c.pretrain_epochs))});
  out.push_back({"config.hidden", scalar(static_cast<double>(c.hidden))});
  out.push_back({"config.kmeans_restarts", scalar(static_cast<double>(c.kmeans_restarts))});
  out.push_back({"config.normalize", scalar(c.normalize ? 1.0 : 0.0)});
  out.push_back({"config.intervention_fraction", scalar(c.intervention_fraction)});

  std::vector<double> view_dims;
  for (const auto& ae : s.aes) view_dims.push_back(static_cast<double>(ae.input_dim()));
  out.push_back({"dims.views", detail::vector_row(view_dims)});
  out.push_back({"dims.k", scalar(static_cast<double>(s.k))});
  out.push_back({"dims.h", scalar(static_cast<double>(s.aes.empty() ? 0 : s.aes.front().latent_dim()))});
  out.push_back({"dims.d", scalar(static_cast<double>(c.d))});
  out.push_back({"dims.m", scalar(static_cast<double>(c.m))});

  if (s.feature_range) {
    for (std::size_t v = 0; v < s.feature_range->lo.size(); ++v) {
      out.push_back({"range." + std::to_string(v) + ".lo", detail::vector_row(s.feature_range->lo[v])});
      out.push_back({"range." + std::to_string(v) + ".hi", detail::vector_row(s.feature_range->hi[v])});
    }
  }
  for (std::size_t v = 0; v < s.aes.size(); ++v) {
    detail::push_mlp(out, "ae." + std::to_string(v) + ".encoder", s.aes[v].encoder);
    detail::push_mlp(out, "ae." + std::to_string(v) + ".decoder", s.aes[v].decoder);
  }
  if (uses_causal_branch(s.ablation)) {
    detail::push_mlp(out, "causal.f_phi", s.causal.f_phi);
    detail::push_mlp(out, "causal.g_theta1", s.causal.g_theta1);
    detail::push_mlp(out, "causal.g_theta2", s.causal.g_theta2);
    detail::push_mlp(out, "causal.g_theta3", s.causal.g_theta3);
  } else if (s.ablation == Ablation::kNoCau) {
    detail::push_mlp(out, "head", s.direct_head);
  }
  out.push_back({"pretrain.centers", s.centers});
  std::vector<double> labels(s.r_prime.begin(), s.r_prime.end());
  out.push_back({"pretrain.r_prime", detail::vector_row(labels)});
  return out;
}

inline Checkpoint checkpoint_from_arrays(std::vector<NamedArray> arrays) {
  const detail::ArrayTable t(std::move(arrays));
  Checkpoint ck;
  TrainConfig& c = ck.config;
  c.alpha = t.scalar("config.alpha");
  c.beta = t.scalar("config.beta");
  c.lr = t.scalar("config.lr");
  c.epochs = t.count("config.epochs");
  c.batch_size = t.count("config.batch_size");
  c.h = t.count("config.h");
  c.d = t.count("config.d");
  c.m = t.count("config.m");
  c.k = t.count("config.k");
  c.warm_fraction = t.scalar("config.warm_fraction");
  c.mc_samples_train = t.count("config.mc_samples_train");
  c.mc_samples_infer = t.count("config.mc_samples_infer");
  const Matrix& seed = t.at("config.seed");
  if (seed.size() != 2) throw CheckpointError("checkpoint: bad seed entry");
  c.seed = (static_cast<std::uint64_t>(seed.data()[0]) << 32) | static_cast<std::uint64_t>(seed.data()[1]);
  const auto ablation = t.count("config.ablation");
  if (ablation > 3) throw CheckpointError("checkpoint: bad ablation code");
  c.ablation = static_cast<Ablation>(ablation);
  c.pretrain_epochs = t.count("config.pretrain_epochs");
  c.hidden = t.count("config.hidden");
  c.kmeans_restarts = t.count("config.kmeans_restarts");
  c.normalize = t.scalar("config.normalize") != 0.0;
  c.intervention_fraction = t.scalar("config.intervention_fraction");

  ModelState& s = ck.model;
  s.ablation = c.ablation;
  s.k = t.count("dims.k");
  const std::size_t num_views = t.at("dims.views").size();
  if (t.has("range.0.lo")) {
    FeatureRange r;
    for (std::size_t v = 0; v < num_views; ++v) {
      r.lo.push_back(t.at("range." + std::to_string(v) + ".lo").data());
      r.hi.push_back(t.at("range." + std::to_string(v) + ".hi").data());
    }
    s.feature_range = std::move(r);
  }
  for (std::size_t v = 0; v < num_views; ++v) {
    s.aes.push_back({t.mlp("ae." + std::to_string(v) + ".encoder"), t.mlp("ae." + std::to_string(v) + ".decoder")});
  }
  if (uses_causal_branch(s.ablation)) {
    s.causal = {t.mlp("causal.f_phi"), t.mlp("causal.g_theta1"), t.mlp("causal.g_theta2"), t.mlp("causal.g_theta3")};
  } else if (s.ablation == Ablation::kNoCau) {
    s.direct_head = t.mlp("head");
  }
  s.centers = t.at("pretrain.centers");
  for (double v : t.at("pretrain.r_prime").data()) s.r_prime.push_back(static_cast<int>(v));
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  write_named_arrays(out, checkpoint_arrays(ck));
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return checkpoint_from_arrays(read_named_arrays(in));
}

}  // namespace caumvc
