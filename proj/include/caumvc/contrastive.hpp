#pragma once

#include <cmath>
#include <string>

#include "caumvc/error.hpp"
#include "caumvc/tensor.hpp"

namespace caumvc {

/// Cosine similarities between rows of the variant and invariant representations.
struct SimilarityMatrix {
  Matrix z;
};

namespace detail {

inline std::vector<double> row_norms(const Matrix& m, const char* which) {
  std::vector<double> norms(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double v : m.row(i)) s += v * v;
    if (s == 0.0) throw DegenerateInputError(std::string("similarity_matrix: all-zero row ") + std::to_string(i) + " in " + which);
    norms[i] = std::sqrt(s);
  }
  return norms;
}

inline Matrix normalize_rows(const Matrix& m, const std::vector<double>& norms) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (double& v : out.row(i)) v /= norms[i];
  }
  return out;
}

}  // namespace detail

/// Z_ij = <a_i, b_j> / (|a_i| |b_j|).
inline SimilarityMatrix similarity_matrix(const Matrix& e_va, const Matrix& e_in) {
  require_same_shape(e_va, e_in, "similarity_matrix");
  const Matrix a = detail::normalize_rows(e_va, detail::row_norms(e_va, "e_va"));
  const Matrix b = detail::normalize_rows(e_in, detail::row_norms(e_in, "e_in"));
  return {matmul_transposed(a, b)};
}

/// (1/N) sum_i (Z_ii - 1)^2 + 1/(N^2 - N) sum_{i != j} Z_ij^2.
inline double contrastive_loss(const SimilarityMatrix& sim) {
  const Matrix& z = sim.z;
  if (z.rows() != z.cols()) throw ShapeError("contrastive_loss: Z must be square, got " + shape_str(z));
  const std::size_t n = z.rows();
  if (n < 2) throw ArgumentError("contrastive_loss: need N >= 2");
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        diag += (z(i, i) - 1.0) * (z(i, i) - 1.0);
      } else {
        off += z(i, j) * z(i, j);
      }
    }
  }
  const double nd = static_cast<double>(n);
  return diag / nd + off / (nd * nd - nd);
}

struct ContrastiveGrads {
  double loss = 0.0;
  Matrix d_va;
  Matrix d_in;
};

/// Loss and gradients w.r.t. both representation matrices.
inline ContrastiveGrads contrastive_loss_with_grad(const Matrix& e_va, const Matrix& e_in) {
  require_same_shape(e_va, e_in, "contrastive_loss_with_grad");
  const std::size_t n = e_va.rows();
  if (n < 2) throw ArgumentError("contrastive_loss: need N >= 2");
  const auto na = detail::row_norms(e_va, "e_va");
  const auto nb = detail::row_norms(e_in, "e_in");
  const Matrix a = detail::normalize_rows(e_va, na);
  const Matrix b = detail::normalize_rows(e_in, nb);
  SimilarityMatrix sim{matmul_transposed(a, b)};

  ContrastiveGrads out;
  out.loss = contrastive_loss(sim);

  const double nd = static_cast<double>(n);
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      g(i, j) = i == j ? 2.0 * (sim.z(i, i) - 1.0) / nd : 2.0 * sim.z(i, j) / (nd * nd - nd);
    }
  }
  // dL/da_hat = G b_hat, dL/db_hat = G^T a_hat; then project out the radial component.
  Matrix da_hat = matmul(g, b);
  Matrix db_hat = matmul_at_b(g, a);
  auto unnormalize = [](const Matrix& unit, const Matrix& d_unit, const std::vector<double>& norms) {
    Matrix d(unit.rows(), unit.cols());
    for (std::size_t i = 0; i < unit.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < unit.cols(); ++k) dot += unit(i, k) * d_unit(i, k);
      for (std::size_t k = 0; k < unit.cols(); ++k) d(i, k) = (d_unit(i, k) - dot * unit(i, k)) / norms[i];
    }
    return d;
  };
  out.d_va = unnormalize(a, da_hat, na);
  out.d_in = unnormalize(b, db_hat, nb);
  return out;
}

}  // namespace caumvc
