#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "caumvc/error.hpp"
#include "caumvc/rng.hpp"
#include "caumvc/tensor.hpp"

namespace caumvc {

enum class Activation { kIdentity, kRelu, kTanh };

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kTanh: return std::tanh(z);
    case Activation::kIdentity: break;
  }
  return z;
}

/// Derivative expressed through the pre-activation z.
inline double activate_grad(Activation a, double z) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kIdentity: break;
  }
  return 1.0;
}

struct DenseLayer {
  Matrix weight;                // out x in
  std::vector<double> bias;     // out
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

/// Glorot-uniform weights from `rng`, zero bias.
inline DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0), act};
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : layer.weight.data()) w = rng.uniform(-limit, limit);
  return layer;
}

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].bias.size() != layers_[i].out_dim()) {
        throw ShapeError("Mlp: layer " + std::to_string(i) + " bias length != weight rows");
      }
      if (i > 0 && layers_[i - 1].out_dim() != layers_[i].in_dim()) {
        throw ShapeError("Mlp: layer " + std::to_string(i - 1) + " output " +
                         std::to_string(layers_[i - 1].out_dim()) + " != layer " + std::to_string(i) +
                         " input " + std::to_string(layers_[i].in_dim()));
      }
    }
  }

  /// Hidden layers use `hidden_act`, the last layer `output_act`.
  static Mlp make(std::span<const std::size_t> widths, Activation hidden_act, Activation output_act, Rng& rng) {
    if (widths.size() < 2) throw ArgumentError("Mlp::make: need at least input and output width");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const bool last = i + 2 == widths.size();
      layers.push_back(make_dense(widths[i], widths[i + 1], last ? output_act : hidden_act, rng));
    }
    return Mlp(std::move(layers));
  }

  std::size_t in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Flat views of every trainable array: weight then bias, layer by layer.
  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
      out.emplace_back(l.weight.data());
      out.emplace_back(l.bias);
    }
    return out;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto& x = a.layers_[i];
      const auto& y = b.layers_[i];
      if (!(x.weight == y.weight) || x.bias != y.bias || x.activation != y.activation) return false;
    }
    return true;
  }

 private:
  std::vector<DenseLayer> layers_;
};

/// Per-layer inputs and pre-activations recorded by mlp_forward.
struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
};

struct MlpGrads {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;
  Matrix input;

  static MlpGrads zeros_like(const Mlp& net) {
    MlpGrads g;
    for (const auto& l : net.layers()) {
      g.weight.emplace_back(l.out_dim(), l.in_dim());
      g.bias.emplace_back(l.out_dim(), 0.0);
    }
    return g;
  }

  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      out.emplace_back(weight[i].data());
      out.emplace_back(bias[i]);
    }
    return out;
  }
};

inline Matrix mlp_forward(const Matrix& x, const Mlp& net, MlpCache* cache = nullptr) {
  if (net.layers().empty()) throw ArgumentError("mlp_forward: empty network");
  if (x.cols() != net.in_dim()) {
    throw ShapeError("mlp_forward: input width " + std::to_string(x.cols()) + " != network input " +
                     std::to_string(net.in_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix h = x;
  for (const auto& layer : net.layers()) {
    Matrix z = matmul_transposed(h, layer.weight);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto zi = z.row(i);
      for (std::size_t o = 0; o < zi.size(); ++o) zi[o] += layer.bias[o];
    }
    Matrix a = z;
    if (layer.activation != Activation::kIdentity) {
      for (double& v : a.data()) v = activate(layer.activation, v);
    }
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre_activations.push_back(std::move(z));
    }
    h = std::move(a);
  }
  return h;
}

/// Accumulates parameter gradients into `grads` (so several upstream paths can share one
/// MlpGrads) and overwrites grads.input with dL/dx.
inline void mlp_backward(const MlpCache& cache, const Mlp& net, const Matrix& upstream, MlpGrads& grads) {
  const auto& layers = net.layers();
  if (cache.inputs.size() != layers.size() || cache.pre_activations.size() != layers.size()) {
    throw ShapeError("mlp_backward: cache holds " + std::to_string(cache.inputs.size()) +
                     " layers, network has " + std::to_string(layers.size()));
  }
  if (grads.weight.size() != layers.size()) {
    throw ShapeError("mlp_backward: gradient buffer does not match network");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& z = cache.pre_activations[l];
    if (z.cols() != layers[l].out_dim() || cache.inputs[l].cols() != layers[l].in_dim()) {
      throw ShapeError("mlp_backward: stale cache at layer " + std::to_string(l));
    }
  }
  const Matrix& out_z = cache.pre_activations.back();
  if (upstream.rows() != out_z.rows() || upstream.cols() != out_z.cols()) {
    throw ShapeError("mlp_backward: upstream " + shape_str(upstream) + " vs output " + shape_str(out_z));
  }

  Matrix delta = upstream;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const auto& z = cache.pre_activations[l];
    if (layer.activation != Activation::kIdentity) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta.data()[i] *= activate_grad(layer.activation, z.data()[i]);
    }
    add_inplace(grads.weight[l], matmul_at_b(delta, cache.inputs[l]));
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto di = delta.row(i);
      for (std::size_t o = 0; o < di.size(); ++o) grads.bias[l][o] += di[o];
    }
    delta = matmul(delta, layer.weight);
  }
  grads.input = std::move(delta);
}

}  // namespace caumvc
