#include "gaal/matrix.hpp"

#include <cmath>
#include <limits>

#include "gaal/errors.hpp"

namespace gaal {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a) + " and " +
                     shape_str(b));
  }
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + i * a.cols;
    double* orow = out.data.data() + i * out.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b_t) {
  if (a.cols != b_t.cols) {
    throw ShapeError("matmul_transposed: incompatible shapes " + shape_str(a) +
                     " and " + shape_str(b_t) + "^T");
  }
  Matrix out(a.rows, b_t.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b_t.rows; ++j) {
      out(i, j) = dot(a.row(i), b_t.row(j));
    }
  }
  return out;
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("dot: length mismatch " + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

Matrix softmax_rows(const Matrix& z) {
  Matrix out(z.rows, z.cols);
  for (std::size_t i = 0; i < z.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : z.row(i)) mx = std::max(mx, x);
    double sum = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) {
      const double e = std::exp(z(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < z.cols; ++j) out(i, j) /= sum;
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace gaal
