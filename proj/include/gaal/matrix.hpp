#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gaal {

/// Dense row-major matrix of 64-bit floats.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Matrix&) const = default;
};

std::string shape_str(const Matrix& m);

/// a (r×k) times b (k×c). Throws ShapeError naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// b transposed product: a (r×k) times bT (c×k) -> r×c. Avoids materializing
/// the transpose in the hot backprop path.
Matrix matmul_transposed(const Matrix& a, const Matrix& b_t);

double dot(std::span<const double> u, std::span<const double> v);
double norm2(std::span<const double> v);

/// Row-wise softmax with row-max subtraction.
Matrix softmax_rows(const Matrix& z);

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double relu_grad(double x) { return x > 0.0 ? 1.0 : 0.0; }

bool all_finite(std::span<const double> v);

}  // namespace gaal
