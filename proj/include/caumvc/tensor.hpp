#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "caumvc/error.hpp"

namespace caumvc {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(where) + ": shape " + shape_str(a) + " vs " + shape_str(b));
  }
}

/// out = x * w^T, x: N x in, w: out x in.
inline Matrix matmul_transposed(const Matrix& x, const Matrix& w) {
  if (x.cols() != w.cols()) {
    throw ShapeError("matmul_transposed: " + shape_str(x) + " * (" + shape_str(w) + ")^T");
  }
  Matrix out(x.rows(), w.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const auto wo = w.row(o);
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) acc += xi[k] * wo[k];
      out(i, o) = acc;
    }
  }
  return out;
}

/// out = a * b, a: N x K, b: K x M.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto oi = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) oi[j] += aik * bk[j];
    }
  }
  return out;
}

/// out = a^T * b, a: N x P, b: N x Q.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_at_b: " + shape_str(a) + " vs " + shape_str(b));
  Matrix out(a.cols(), b.cols());
  for (std::size_t n = 0; n < a.rows(); ++n) {
    const auto an = a.row(n);
    const auto bn = b.row(n);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double ap = an[p];
      if (ap == 0.0) continue;
      auto op = out.row(p);
      for (std::size_t q = 0; q < b.cols(); ++q) op[q] += ap * bn[q];
    }
  }
  return out;
}

inline Matrix hconcat(std::span<const Matrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t n = blocks.front().rows();
  std::size_t width = 0;
  for (const auto& b : blocks) {
    if (b.rows() != n) throw ShapeError("hconcat: row count mismatch");
    width += b.cols();
  }
  Matrix out(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = 0;
    for (const auto& b : blocks) {
      std::copy(b.row(i).begin(), b.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(off));
      off += b.cols();
    }
  }
  return out;
}

inline Matrix hconcat(const Matrix& a, const Matrix& b) {
  const Matrix pair[] = {a, b};
  return hconcat(std::span<const Matrix>(pair));
}

/// Columns [begin, begin + width).
inline Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t width) {
  if (begin + width > m.cols()) throw ShapeError("slice_cols: out of range on " + shape_str(m));
  Matrix out(m.rows(), width);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::copy_n(m.row(i).begin() + static_cast<std::ptrdiff_t>(begin), width, out.row(i).begin());
  }
  return out;
}

/// Adds src into columns [begin, begin + src.cols()) of dst.
inline void add_into_cols(Matrix& dst, std::size_t begin, const Matrix& src) {
  if (dst.rows() != src.rows() || begin + src.cols() > dst.cols()) {
    throw ShapeError("add_into_cols: " + shape_str(src) + " into " + shape_str(dst));
  }
  for (std::size_t i = 0; i < src.rows(); ++i) {
    for (std::size_t j = 0; j < src.cols(); ++j) dst(i, begin + j) += src(i, j);
  }
}

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

inline void add_inplace(Matrix& dst, const Matrix& src, double scale = 1.0) {
  require_same_shape(dst, src, "add_inplace");
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += scale * src.data()[i];
}

inline Matrix scaled(const Matrix& m, double s) {
  Matrix out = m;
  for (double& v : out.data()) v *= s;
  return out;
}

inline double squared_frobenius(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return acc;
}

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto in = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

/// Index of the row maximum; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace caumvc
