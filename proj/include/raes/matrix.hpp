/*
 * Copyright 2026 raes authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "raes/error.hpp"

namespace raes {

/// Dense row-major matrix of 64-bit reals. Immutable by convention once a
/// computation has produced it; all library operations return fresh values.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  std::span<double> row(std::size_t i) {
    return std::span<double>(data_.data() + i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_.data() + i * cols_, cols_);
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  std::string shape_str() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Standard matrix product. Throws ShapeError naming both shapes when the
/// inner dimensions disagree.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " x " +
                     b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const std::size_t arow = i * b.cols();
      const std::size_t brow = k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out[arow + j] += aik * b[brow + j];
      }
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  }
  return out;
}

/// Element-wise dst += src.
inline void accumulate(Matrix& dst, const Matrix& src) {
  if (!dst.same_shape(src)) {
    throw ShapeError("accumulate shape mismatch: " + dst.shape_str() +
                     " += " + src.shape_str());
  }
  for (std::size_t i = 0; i < dst.data().size(); ++i) {
    dst[i] += src[i];
  }
}

/// Row-wise softmax, stabilized by per-row max subtraction. Total on finite
/// input: every output row is nonnegative and sums to 1.
inline Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double mx = m(i, 0);
    for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, m(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double e = std::exp(m(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

/// Row-wise softmax restricted to unmasked columns. Masked entries come out
/// exactly 0. mask[j] == true means column j is excluded for every row.
/// Throws DegenerateError if a row has no unmasked column.
inline Matrix softmax_rows_masked(const Matrix& m,
                                  const std::vector<bool>& mask) {
  if (mask.size() != m.cols()) {
    throw ShapeError("softmax_rows_masked: mask length " +
                     std::to_string(mask.size()) + " vs cols " +
                     std::to_string(m.cols()));
  }
  bool any = false;
  for (bool b : mask) {
    if (!b) any = true;
  }
  if (!any) throw DegenerateError("softmax_rows_masked: all columns masked");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (!mask[j]) mx = std::max(mx, m(i, j));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (mask[j]) continue;
      const double e = std::exp(m(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (!mask[j]) out(i, j) /= sum;
    }
  }
  return out;
}

inline double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("dot: length mismatch " + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm(std::span<const double> u) {
  return std::sqrt(dot(u, u));
}

/// Cosine similarity. Throws DegenerateError on a zero-norm input.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw DegenerateError("cosine: zero-norm vector");
  }
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

}  // namespace raes
