#include "covsde/symmat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace covsde {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: shape mismatch");
  Matrix c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix add_scaled(double x, const Matrix& a, double y, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("add_scaled: shape mismatch");
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = x * a.data[i] + y * b.data[i];
  return c;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

bool all_finite(const Matrix& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

FlatIndexMap::FlatIndexMap(int m) : m_(m) {
  if (m < 1) throw std::invalid_argument("FlatIndexMap: dimension must be >= 1");
  pairs_.reserve(static_cast<std::size_t>(m) * (m + 1) / 2);
  for (int a = 0; a < m; ++a)
    for (int b = a; b < m; ++b) pairs_.emplace_back(a, b);
}

int FlatIndexMap::index(int a, int b) const {
  if (a < 0 || b < 0 || a >= m_ || b >= m_) throw std::out_of_range("FlatIndexMap: index out of range");
  if (a > b) std::swap(a, b);
  // row-major upper triangle: row a starts after a full rows of shrinking length
  return a * m_ - a * (a - 1) / 2 + (b - a);
}

TokenCovariance TokenCovariance::from_matrix(const Matrix& a, double sym_tol) {
  if (a.rows != a.cols) throw std::invalid_argument("TokenCovariance: matrix must be square");
  if (!all_finite(a)) throw std::invalid_argument("TokenCovariance: non-finite entries");
  double scale = 0.0;
  for (double v : a.data) scale = std::max(scale, std::abs(v));
  TokenCovariance out(a.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = i; j < a.cols; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > sym_tol * std::max(1.0, scale))
        throw std::invalid_argument("TokenCovariance: matrix is not symmetric");
      out.set(i, j, 0.5 * (a(i, j) + a(j, i)));
    }
  }
  return out;
}

std::vector<double> flatten(const TokenCovariance& v) {
  const FlatIndexMap map(v.dim());
  std::vector<double> out(static_cast<std::size_t>(map.size()));
  for (int k = 0; k < map.size(); ++k) {
    auto [a, b] = map.pair_at(k);
    out[static_cast<std::size_t>(k)] = v(a, b);
  }
  return out;
}

TokenCovariance unflatten(const std::vector<double>& v, int m) {
  const FlatIndexMap map(m);
  if (static_cast<int>(v.size()) != map.size())
    throw std::invalid_argument("unflatten: vector length does not match m(m+1)/2");
  TokenCovariance out(m);
  for (int k = 0; k < map.size(); ++k) {
    auto [a, b] = map.pair_at(k);
    out.set(a, b, v[static_cast<std::size_t>(k)]);
  }
  return out;
}

EigenDecomposition sym_eigen(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("sym_eigen: matrix must be square");
  if (!all_finite(a)) throw std::invalid_argument("sym_eigen: non-finite input");
  const int n = a.rows;

  // Work on the symmetrized copy so tiny asymmetries cannot steer rotations.
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = 0.5 * (a(i, j) + a(j, i));
  Matrix q = Matrix::identity(n);

  const double norm = frobenius_norm(m);
  if (n == 1 || norm == 0.0) {
    EigenDecomposition dec{std::vector<double>(static_cast<std::size_t>(n)), q};
    for (int i = 0; i < n; ++i) dec.values[static_cast<std::size_t>(i)] = m(i, i);
    std::sort(dec.values.begin(), dec.values.end(), std::greater<double>());
    return dec;
  }

  // Cyclic sweeps of 2x2 Givens rotations annihilating each off-diagonal
  // entry in turn; quadratic convergence once the off-diagonal mass is small.
  const int max_sweeps = 64;
  const double stop = 1e-15 * norm;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int qq = p + 1; qq < n; ++qq) off += m(p, qq) * m(p, qq);
    off = std::sqrt(2.0 * off);
    if (off <= stop) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int r = p + 1; r < n; ++r) {
        const double apq = m(p, r);
        if (apq == 0.0) continue;
        const double app = m(p, p);
        const double aqq = m(r, r);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, r);
          m(k, p) = c * mkp - s * mkq;
          m(k, r) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(r, k);
          m(p, k) = c * mpk - s * mqk;
          m(r, k) = s * mpk + c * mqk;
        }
        m(p, r) = 0.0;
        m(r, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double qkp = q(k, p);
          const double qkq = q(k, r);
          q(k, p) = c * qkp - s * qkq;
          q(k, r) = s * qkp + c * qkq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return m(i, i) > m(j, j); });

  EigenDecomposition dec{std::vector<double>(static_cast<std::size_t>(n)), Matrix(n, n)};
  for (int k = 0; k < n; ++k) {
    dec.values[static_cast<std::size_t>(k)] = m(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    for (int i = 0; i < n; ++i) dec.vectors(i, k) = q(i, order[static_cast<std::size_t>(k)]);
  }
  return dec;
}

Matrix psd_sqrt(const Matrix& a, double tol) {
  EigenDecomposition dec = sym_eigen(a);
  const int n = a.rows;
  const double max_eig = dec.values.empty() ? 0.0 : dec.values.front();
  const double floor = -tol * std::max(1.0, max_eig);
  for (double& w : dec.values) {
    if (w < floor) throw std::domain_error("psd_sqrt: matrix is indefinite beyond tolerance");
    if (w < 0.0) w = 0.0;
  }

  // S = Q diag(sqrt(w)) Q^T, assembled symmetrically.
  Matrix s(n, n);
  for (int k = 0; k < n; ++k) {
    const double r = std::sqrt(dec.values[static_cast<std::size_t>(k)]);
    if (r == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double qik = dec.vectors(i, k) * r;
      for (int j = i; j < n; ++j) s(i, j) += qik * dec.vectors(j, k);
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s(j, i) = s(i, j);
  return s;
}

TokenCovariance correlation(const TokenCovariance& v) {
  const int m = v.dim();
  for (int i = 0; i < m; ++i)
    if (!(v(i, i) > 0.0)) throw std::domain_error("correlation: nonpositive diagonal entry");
  TokenCovariance rho(m);
  for (int i = 0; i < m; ++i) {
    rho.set(i, i, 1.0);
    for (int j = i + 1; j < m; ++j) rho.set(i, j, v(i, j) / std::sqrt(v(i, i) * v(j, j)));
  }
  return rho;
}

TokenCovariance covariance_of(const Matrix& x, int n) {
  if (n < 1) throw std::invalid_argument("covariance_of: width must be >= 1");
  if (x.cols != n) throw std::invalid_argument("covariance_of: token matrix has wrong width");
  const int m = x.rows;
  TokenCovariance v(m);
  for (int a = 0; a < m; ++a) {
    for (int b = a; b < m; ++b) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += x(a, k) * x(b, k);
      v.set(a, b, s / n);
    }
  }
  return v;
}

}  // namespace covsde
