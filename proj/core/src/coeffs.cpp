#include "covsde/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace covsde {
namespace {

void check_index(const TokenCovariance& V, int idx, const char* what) {
  if (idx < 0 || idx >= V.dim()) {
    throw std::out_of_range(std::string(what) + ": token index out of range");
  }
}

// Double-centering of V: T = V - rowmean - colmean + grandmean. All the
// softmax-expansion moments factor through it: s1(a,d,b,w) = V^{ab} T^{dw}.
Matrix double_centered(const TokenCovariance& V) {
  const int m = V.dim();
  std::vector<double> row_mean(m, 0.0);
  double grand = 0.0;
  for (int a = 0; a < m; ++a) {
    double s = 0.0;
    for (int b = 0; b < m; ++b) s += V(a, b);
    row_mean[a] = s / m;
    grand += s;
  }
  grand /= static_cast<double>(m) * m;
  Matrix T(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      T(a, b) = V(a, b) - row_mean[a] - row_mean[b] + grand;
    }
  }
  return T;
}

// s2(a,d) = V^{aa} * e[d] with e[d] = T^{dd} + grandmean - diagmean.
std::vector<double> s2_profile(const TokenCovariance& V, const Matrix& T) {
  const int m = V.dim();
  double grand = 0.0, diag = 0.0;
  for (int a = 0; a < m; ++a) {
    diag += V(a, a);
    for (int b = 0; b < m; ++b) grand += V(a, b);
  }
  grand /= static_cast<double>(m) * m;
  diag /= m;
  std::vector<double> e(m);
  for (int d = 0; d < m; ++d) e[d] = T(d, d) + grand - diag;
  return e;
}

void check_params(const TokenCovariance& V, const CoeffParams& p, const char* what) {
  p.validate();
  if (p.m != V.dim()) {
    throw std::invalid_argument(std::string(what) + ": params.m does not match covariance dimension");
  }
}

}  // namespace

void CoeffParams::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("CoeffParams: gamma must lie in [0,1]");
  }
  if (!(tau0 > 0.0)) throw std::invalid_argument("CoeffParams: tau0 must be positive");
  if (m < 1) throw std::invalid_argument("CoeffParams: m must be at least 1");
  if (!std::isfinite(cplus) || !std::isfinite(cminus)) {
    throw std::invalid_argument("CoeffParams: slope offsets must be finite");
  }
}

double nu(double rho, double cplus, double cminus) {
  if (!std::isfinite(rho) || std::abs(rho) > 1.0 + 1e-12) {
    throw std::domain_error("nu: correlation outside [-1,1]");
  }
  rho = std::clamp(rho, -1.0, 1.0);
  if (rho == 1.0) return 0.0;
  const double diff = cplus - cminus;
  const double amp = diff * diff / (2.0 * std::numbers::pi);
  return amp * (std::sqrt(std::max(0.0, 1.0 - rho * rho)) - rho * std::acos(rho));
}

std::vector<double> b_relu(const TokenCovariance& V, double cplus, double cminus) {
  const int m = V.dim();
  const FlatIndexMap map(m);
  std::vector<double> out(map.size(), 0.0);
  for (int a = 0; a < m; ++a) {
    if (!(V(a, a) > 0.0)) {
      throw std::domain_error("b_relu: covariance diagonal must be positive");
    }
  }
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      const double scale = std::sqrt(V(a, a) * V(b, b));
      const double rho = V(a, b) / scale;
      out[static_cast<std::size_t>(map.index(a, b))] = nu(rho, cplus, cminus) * scale;
    }
  }
  return out;
}

Matrix sigma_lin(const TokenCovariance& V) {
  const FlatIndexMap map(V.dim());
  const int M = map.size();
  Matrix S(M, M);
  for (int k = 0; k < M; ++k) {
    const auto [a, b] = map.pair_at(k);
    for (int l = 0; l < M; ++l) {
      const auto [d, w] = map.pair_at(l);
      S(k, l) = V(a, d) * V(b, w) + V(a, w) * V(b, d);
    }
  }
  return S;
}

double s1(const TokenCovariance& V, int alpha, int delta, int beta, int omega) {
  check_index(V, alpha, "s1");
  check_index(V, delta, "s1");
  check_index(V, beta, "s1");
  check_index(V, omega, "s1");
  const Matrix T = double_centered(V);
  return V(alpha, beta) * T(delta, omega);
}

double s2(const TokenCovariance& V, int alpha, int delta) {
  check_index(V, alpha, "s2");
  check_index(V, delta, "s2");
  const Matrix T = double_centered(V);
  return V(alpha, alpha) * s2_profile(V, T)[static_cast<std::size_t>(delta)];
}

std::vector<double> b_attn(const TokenCovariance& V, const CoeffParams& p) {
  check_params(V, p, "b_attn");
  const int m = V.dim();
  const FlatIndexMap map(m);
  const Matrix T = double_centered(V);
  const std::vector<double> e = s2_profile(V, T);

  // First term: (1/m^2) sum_{v,k} V^{vk} s1(a,v,b,k) = V^{ab} * c1 with
  // c1 = (1/m^2) <V, T>_F.
  double c1 = 0.0;
  for (int v = 0; v < m; ++v) {
    for (int k = 0; k < m; ++k) c1 += V(v, k) * T(v, k);
  }
  c1 /= static_cast<double>(m) * m;

  const double pref = p.gamma * p.gamma / (p.tau0 * p.tau0);
  std::vector<double> out(map.size(), 0.0);
  for (int k = 0; k < map.size(); ++k) {
    const auto [a, b] = map.pair_at(k);
    // Second term: s2(a,v) = V^{aa} e[v], summed against the other token's row.
    double t2 = 0.0;
    for (int v = 0; v < m; ++v) {
      t2 += V(b, v) * V(a, a) * e[v] + V(a, v) * V(b, b) * e[v];
    }
    t2 /= 2.0 * m;
    out[static_cast<std::size_t>(k)] = pref * (V(a, b) * c1 + t2);
  }
  return out;
}

double a_tensor(const TokenCovariance& V, int alpha, int beta, int delta, int omega) {
  check_index(V, alpha, "a_tensor");
  check_index(V, beta, "a_tensor");
  check_index(V, delta, "a_tensor");
  check_index(V, omega, "a_tensor");
  const int m = V.dim();
  const Matrix T = double_centered(V);
  const auto s1t = [&](int a, int d, int b, int w) { return V(a, b) * T(d, w); };
  double acc = 0.0;
  for (int v = 0; v < m; ++v) {
    for (int k = 0; k < m; ++k) {
      acc += V(alpha, k) * V(delta, v) * s1t(beta, k, omega, v) +
             V(alpha, k) * V(omega, v) * s1t(beta, k, delta, v) +
             V(beta, v) * V(delta, k) * s1t(alpha, v, omega, k) +
             V(beta, v) * V(omega, k) * s1t(alpha, v, delta, k);
    }
  }
  return acc / (static_cast<double>(m) * m);
}

Matrix a_matrix(const TokenCovariance& V) {
  const int m = V.dim();
  const FlatIndexMap map(m);
  const int M = map.size();
  // The quadruple sum collapses to P = V T V:
  // A[(a,b),(d,w)] = (V^{bw}P^{ad} + V^{bd}P^{aw} + V^{aw}P^{bd} + V^{ad}P^{bw}) / m^2.
  const Matrix T = double_centered(V);
  const Matrix P = matmul(matmul(V.matrix(), T), V.matrix());
  Matrix A(M, M);
  const double inv = 1.0 / (static_cast<double>(m) * m);
  for (int k = 0; k < M; ++k) {
    const auto [a, b] = map.pair_at(k);
    for (int l = 0; l < M; ++l) {
      const auto [d, w] = map.pair_at(l);
      A(k, l) = inv * (V(b, w) * P(a, d) + V(b, d) * P(a, w) +
                       V(a, w) * P(b, d) + V(a, d) * P(b, w));
    }
  }
  return A;
}

Matrix sigma_attn(const TokenCovariance& V, const CoeffParams& p) {
  check_params(V, p, "sigma_attn");
  const double g2 = p.gamma * p.gamma;
  const double lin_coef = g2 * (2.0 - g2);
  const double a_coef = g2 * g2 / (p.tau0 * p.tau0);
  Matrix S = add_scaled(lin_coef, sigma_lin(V), a_coef, a_matrix(V));
  // Symmetrize before the definiteness check; the entrywise formulas are
  // only guaranteed symmetric up to floating-point noise.
  const int M = S.rows;
  for (int i = 0; i < M; ++i) {
    for (int j = i + 1; j < M; ++j) {
      const double avg = 0.5 * (S(i, j) + S(j, i));
      S(i, j) = avg;
      S(j, i) = avg;
    }
  }
  const EigenDecomposition eig = sym_eigen(S);
  const double scale = std::max(1.0, std::abs(eig.values.front()));
  const double floor = -1e-8 * scale;
  const double min_eig = eig.values.back();
  if (min_eig < floor) {
    throw std::domain_error("sigma_attn: diffusion matrix is indefinite beyond tolerance");
  }
  if (min_eig < 0.0) {
    // Within tolerance: project the slightly negative eigenvalues to zero.
    Matrix out(M, M);
    for (int i = 0; i < M; ++i) {
      for (int j = i; j < M; ++j) {
        double s = 0.0;
        for (int r = 0; r < M; ++r) {
          s += eig.vectors(i, r) * std::max(0.0, eig.values[static_cast<std::size_t>(r)]) *
               eig.vectors(j, r);
        }
        out(i, j) = s;
        out(j, i) = s;
      }
    }
    return out;
  }
  return S;
}

DriftDiffusion resnet_coeffs(const TokenCovariance& V, const CoeffParams& p) {
  check_params(V, p, "resnet_coeffs");
  const double g2 = p.gamma * p.gamma;
  DriftDiffusion out;
  out.drift = b_relu(V, p.cplus, p.cminus);
  for (double& x : out.drift) x *= g2;
  out.diffusion = sigma_lin(V);
  for (double& x : out.diffusion.data) x *= 2.0 * g2;
  return out;
}

DriftDiffusion attention_coeffs(const TokenCovariance& V, const CoeffParams& p) {
  DriftDiffusion out;
  out.drift = b_attn(V, p);
  out.diffusion = sigma_attn(V, p);
  return out;
}

DriftDiffusion transformer_coeffs(const TokenCovariance& V, const CoeffParams& p) {
  DriftDiffusion attn = attention_coeffs(V, p);
  const DriftDiffusion res = resnet_coeffs(V, p);
  for (std::size_t i = 0; i < attn.drift.size(); ++i) attn.drift[i] += res.drift[i];
  for (std::size_t i = 0; i < attn.diffusion.data.size(); ++i) {
    attn.diffusion.data[i] += res.diffusion.data[i];
  }
  return attn;
}

DriftDiffusion sde_coeffs(CoeffKind kind, const TokenCovariance& V, const CoeffParams& p) {
  switch (kind) {
    case CoeffKind::resnet:
      return resnet_coeffs(V, p);
    case CoeffKind::attention:
      return attention_coeffs(V, p);
    case CoeffKind::transformer:
      return transformer_coeffs(V, p);
  }
  throw std::invalid_argument("sde_coeffs: unknown coefficient kind");
}

}  // namespace covsde
