#pragma once

#include <utility>
#include <vector>

#include "covsde/matrix.hpp"

namespace covsde {

// Bijection between upper-triangular index pairs (a <= b) of an m x m
// symmetric matrix and linear indices 0..M-1, M = m(m+1)/2. Ordering is
// row-major over the upper triangle: (0,0),(0,1),...,(0,m-1),(1,1),...
// Every module shares this one flattening convention.
class FlatIndexMap {
 public:
  explicit FlatIndexMap(int m);

  int dim() const { return m_; }
  int size() const { return static_cast<int>(pairs_.size()); }

  // Accepts either order; maps (min,max).
  int index(int a, int b) const;
  std::pair<int, int> pair_at(int k) const { return pairs_.at(static_cast<std::size_t>(k)); }

 private:
  int m_;
  std::vector<std::pair<int, int>> pairs_;
};

// Symmetric m x m matrix of token inner products (the SDE state).
// Symmetry is maintained exactly by construction: set() writes both halves.
class TokenCovariance {
 public:
  TokenCovariance() = default;
  explicit TokenCovariance(int m) : m_(Matrix(m, m)) {}

  // Validating factory for externally supplied matrices.
  static TokenCovariance from_matrix(const Matrix& a, double sym_tol = 1e-12);

  int dim() const { return m_.rows; }
  double operator()(int a, int b) const { return m_(a, b); }
  void set(int a, int b, double v) {
    m_(a, b) = v;
    m_(b, a) = v;
  }
  const Matrix& matrix() const { return m_; }
  bool finite() const { return all_finite(m_); }

 private:
  Matrix m_;
};

std::vector<double> flatten(const TokenCovariance& v);
// Inverse of flatten; throws std::invalid_argument on length mismatch.
TokenCovariance unflatten(const std::vector<double>& v, int m);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k is the eigenvector of values[k]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Dimensions here
// are at most m(m+1)/2 with m <= ~8, so robustness beats asymptotics.
// Throws std::invalid_argument on non-square or non-finite input.
EigenDecomposition sym_eigen(const Matrix& a);

// Symmetric PSD square root with eigenvalue clipping. Eigenvalues in
// [-tol*max(1,max_eig), 0) are clipped to zero; anything more negative is a
// genuinely indefinite matrix and throws std::domain_error (silent clipping
// would mask coefficient bugs).
Matrix psd_sqrt(const Matrix& a, double tol = 1e-8);

// rho^{ab} = V^{ab} / sqrt(V^{aa} V^{bb}). Throws on nonpositive diagonal.
TokenCovariance correlation(const TokenCovariance& v);

// V = X X^T / n from an m x n token matrix; PSD by construction.
TokenCovariance covariance_of(const Matrix& x, int n);

}  // namespace covsde
