#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "patchgraph/errors.hpp"

namespace patchgraph {

// Dense row-major matrix of doubles. Training arithmetic is 64-bit
// throughout; 32-bit floats exist only in the on-disk feature format.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return rows * cols; }

  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

// c += a * b
inline void matmul_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const std::size_t m = a.rows, k = a.cols, n = b.cols;
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
#pragma omp parallel for schedule(static) if (m >= 4096)
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a^T * b  (a is m x k, b is m x n, c is k x n)
inline void matmul_at_b_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const std::size_t m = a.rows, k = a.cols, n = b.cols;
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    const double* brow = pb + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* crow = pc + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a * b^T  (a is m x k, b is n x k, c is m x n)
inline void matmul_a_bt_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const std::size_t m = a.rows, k = a.cols, n = b.rows;
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
#pragma omp parallel for schedule(static) if (m >= 4096)
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* crow = pc + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

}  // namespace patchgraph
