#pragma once

#include <cstddef>
#include <vector>

namespace covsde {

// Minimal dense row-major matrix. Everything in this project is tiny
// (token counts m <= ~8, flattened dimensions M = m(m+1)/2 <= 36), so the
// goal is clarity and exact reproducibility, not BLAS throughput.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(int i, int j) {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
// C = x*A + y*B (same shape)
Matrix add_scaled(double x, const Matrix& a, double y, const Matrix& b);

double frobenius_norm(const Matrix& a);
bool all_finite(const Matrix& a);

}  // namespace covsde
