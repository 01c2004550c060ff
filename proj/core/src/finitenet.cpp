#include "covsde/finitenet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace covsde {
namespace {

constexpr double kPsdTol = 1e-8;

// Overflow inside a projected step (e.g. extreme activation slopes) must
// surface as a non-finite state that forward_network can attribute to the
// layer, not as an eigensolver exception. A NaN output plays that role.
Matrix nan_state(int rows, int cols) {
  Matrix out(rows, cols);
  std::fill(out.data.begin(), out.data.end(), std::numeric_limits<double>::quiet_NaN());
  return out;
}

// Attention matrix selection shared by the explicit and projected paths.
// The vanilla and Pre-LN baselines are the shaped matrix with all three
// modifications disabled (plain softmax at temperature sqrt(n_k)).
Matrix attention_matrix_for(const Matrix& Y, const NetConfig& cfg) {
  if (cfg.variant == NetVariant::vanilla_softmax || cfg.variant == NetVariant::pre_ln) {
    const AttentionToggles off{false, false, false};
    return shaped_attention_matrix(Y, cfg.tau0, cfg.n, cfg.n_k, 0.0, 0.0, off);
  }
  return shaped_attention_matrix(Y, cfg.tau0, cfg.n, cfg.n_k, cfg.gamma1, cfg.gamma2,
                                 cfg.toggles);
}

Matrix projected_attention_step(const Matrix& X, const NetConfig& cfg, RandomStream& rs) {
  const int m = X.rows;
  const int n = X.cols;
  const Matrix Z = cfg.variant == NetVariant::pre_ln ? layer_norm_rows(X) : X;
  const TokenCovariance cz = covariance_of(Z, n);
  if (!cz.finite()) return nan_state(m, n);
  const Matrix L = psd_sqrt(cz.matrix(), kPsdTol);
  const Matrix Gq = rs.normal_matrix(m, cfg.n_k);
  const Matrix Gk = rs.normal_matrix(m, cfg.n_k);
  const Matrix Y = matmul_nt(matmul(L, Gq), matmul(L, Gk));
  const Matrix A = attention_matrix_for(Y, cfg);
  const Matrix Gv = rs.normal_matrix(m, n);
  return add_scaled(cfg.lambda, X, cfg.gamma, matmul(matmul(A, L), Gv));
}

Matrix projected_resnet_step(const Matrix& X, const NetConfig& cfg, RandomStream& rs) {
  const int m = X.rows;
  const int n = X.cols;
  const TokenCovariance cx = covariance_of(X, n);
  if (!cx.finite()) return nan_state(m, n);
  const Matrix L = psd_sqrt(cx.matrix(), kPsdTol);
  const Matrix Gpre = rs.normal_matrix(m, n);
  Matrix H = matmul(L, Gpre);
  for (double& x : H.data) x = shaped_relu(x, cfg.cplus, cfg.cminus, n);
  const TokenCovariance ch = covariance_of(H, n);
  if (!ch.finite()) return nan_state(m, n);
  const Matrix LH = psd_sqrt(ch.matrix(), kPsdTol);
  const Matrix Gpost = rs.normal_matrix(m, n);
  const double c = he_constant(cfg.cplus, cfg.cminus, n);
  return add_scaled(cfg.lambda, X, cfg.gamma * std::sqrt(c), matmul(LH, Gpost));
}

Matrix explicit_layer(const Matrix& X, const NetConfig& cfg, RandomStream& rs) {
  const LayerWeights w = sample_layer_weights(rs, cfg.n, cfg.n_k);
  switch (cfg.variant) {
    case NetVariant::resnet_relu:
      return resnet_layer(X, w, cfg);
    case NetVariant::shaped_transformer:
      return transformer_block(X, w, cfg);
    default:
      return attention_layer(X, w, cfg);
  }
}

}  // namespace

void NetConfig::validate() const {
  if (n < 1 || d < 0 || m < 1 || n_k < 1) {
    throw std::invalid_argument("NetConfig: n, m, n_k must be >= 1 and d >= 0");
  }
  if (m > n) throw std::invalid_argument("NetConfig: token count m cannot exceed width n");
  if (!(tau0 > 0.0)) throw std::invalid_argument("NetConfig: tau0 must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0) || !(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("NetConfig: lambda and gamma must lie in [0,1]");
  }
  if (!std::isfinite(cplus) || !std::isfinite(cminus) || !std::isfinite(gamma1) ||
      !std::isfinite(gamma2)) {
    throw std::invalid_argument("NetConfig: scalar parameters must be finite");
  }
  if (enforce_branch_norm && std::abs(lambda * lambda + gamma * gamma - 1.0) > 1e-9) {
    throw std::invalid_argument("NetConfig: lambda^2 + gamma^2 must equal 1");
  }
  if (stop.enabled && !(stop.eig_lower > 0.0 && stop.eig_lower < stop.eig_upper)) {
    throw std::invalid_argument("NetConfig: stop thresholds must satisfy 0 < lower < upper");
  }
}

double shaped_relu(double x, double cplus, double cminus, int n) {
  if (n < 1) throw std::invalid_argument("shaped_relu: n must be >= 1");
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  const double sp = 1.0 + cplus * inv_sqrt_n;
  const double sm = 1.0 + cminus * inv_sqrt_n;
  return sp * std::max(x, 0.0) + sm * std::min(x, 0.0);
}

double he_constant(double cplus, double cminus, int n) {
  if (n < 1) throw std::invalid_argument("he_constant: n must be >= 1");
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  const double sp = 1.0 + cplus * inv_sqrt_n;
  const double sm = 1.0 + cminus * inv_sqrt_n;
  return 2.0 / (sp * sp + sm * sm);
}

Matrix attention_logits(const Matrix& X, const Matrix& wq, const Matrix& wk, int n) {
  if (X.cols != wq.rows || X.cols != wk.rows || wq.cols != wk.cols || X.cols != n) {
    throw std::invalid_argument("attention_logits: inconsistent shapes");
  }
  Matrix Y = matmul_nt(matmul(X, wq), matmul(X, wk));
  for (double& y : Y.data) y /= n;
  return Y;
}

Matrix softmax_rows(const Matrix& Y) {
  Matrix A(Y.rows, Y.cols);
  for (int i = 0; i < Y.rows; ++i) {
    double mx = Y(i, 0);
    for (int j = 1; j < Y.cols; ++j) mx = std::max(mx, Y(i, j));
    double sum = 0.0;
    for (int j = 0; j < Y.cols; ++j) {
      const double e = std::exp(Y(i, j) - mx);
      A(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < Y.cols; ++j) A(i, j) /= sum;
  }
  return A;
}

Matrix shaped_attention_matrix(const Matrix& Y, double tau0, int n, int n_k,
                               double gamma1, double gamma2,
                               const AttentionToggles& toggles) {
  if (Y.rows != Y.cols) throw std::invalid_argument("shaped_attention_matrix: Y must be square");
  if (!(tau0 > 0.0)) throw std::invalid_argument("shaped_attention_matrix: tau0 must be positive");
  const int m = Y.rows;
  const double tau = toggles.use_wide_temperature
                         ? tau0 * std::sqrt(static_cast<double>(n) * n_k)
                         : std::sqrt(static_cast<double>(n_k));
  Matrix scaled(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) scaled(i, j) = Y(i, j) / tau;
  }
  Matrix A = softmax_rows(scaled);
  if (toggles.use_centering) {
    // Written as gamma2/m so that a uniform softmax row cancels it exactly.
    const double center = gamma2 / m;
    for (double& a : A.data) a -= center;
  }
  if (toggles.use_identity) {
    for (int i = 0; i < m; ++i) A(i, i) += gamma1;
  }
  return A;
}

Matrix layer_norm_rows(const Matrix& X) {
  Matrix out(X.rows, X.cols);
  for (int i = 0; i < X.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < X.cols; ++j) mean += X(i, j);
    mean /= X.cols;
    double var = 0.0;
    for (int j = 0; j < X.cols; ++j) {
      const double d = X(i, j) - mean;
      var += d * d;
    }
    const double sd = std::max(std::sqrt(var / X.cols), 1e-300);
    for (int j = 0; j < X.cols; ++j) out(i, j) = (X(i, j) - mean) / sd;
  }
  return out;
}

LayerWeights sample_layer_weights(RandomStream& stream, int n, int n_k) {
  LayerWeights w;
  w.wq = stream.normal_matrix(n, n_k);
  w.wk = stream.normal_matrix(n, n_k);
  w.wv = stream.normal_matrix(n, n);
  w.wpre = stream.normal_matrix(n, n);
  w.wpost = stream.normal_matrix(n, n);
  return w;
}

Matrix attention_layer(const Matrix& X, const LayerWeights& weights, const NetConfig& config) {
  const Matrix Z = config.variant == NetVariant::pre_ln ? layer_norm_rows(X) : X;
  const Matrix Y = attention_logits(Z, weights.wq, weights.wk, config.n);
  const Matrix A = attention_matrix_for(Y, config);
  const Matrix branch = matmul(A, matmul(Z, weights.wv));
  return add_scaled(config.lambda, X, config.gamma / std::sqrt(static_cast<double>(config.n)),
                    branch);
}

Matrix resnet_layer(const Matrix& X, const LayerWeights& weights, const NetConfig& config) {
  if (X.cols != weights.wpre.rows || weights.wpre.cols != weights.wpost.rows) {
    throw std::invalid_argument("resnet_layer: inconsistent shapes");
  }
  const int n = config.n;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  Matrix H = matmul(X, weights.wpre);
  for (double& x : H.data) x = shaped_relu(x * inv_sqrt_n, config.cplus, config.cminus, n);
  const double c = he_constant(config.cplus, config.cminus, n);
  return add_scaled(config.lambda, X, config.gamma * std::sqrt(c) * inv_sqrt_n,
                    matmul(H, weights.wpost));
}

Matrix transformer_block(const Matrix& X, const LayerWeights& weights, const NetConfig& config) {
  return resnet_layer(attention_layer(X, weights, config), weights, config);
}

Matrix projected_layer(const Matrix& X, const NetConfig& config, RandomStream& stream) {
  switch (config.variant) {
    case NetVariant::resnet_relu:
      return projected_resnet_step(X, config, stream);
    case NetVariant::shaped_transformer:
      return projected_resnet_step(projected_attention_step(X, config, stream), config, stream);
    default:
      return projected_attention_step(X, config, stream);
  }
}

Matrix build_inputs(const TokenCovariance& V0, int m, int n, std::uint64_t seed) {
  if (m != V0.dim()) throw std::invalid_argument("build_inputs: m does not match V0 dimension");
  if (m > n) throw std::invalid_argument("build_inputs: token count m cannot exceed width n");
  const Matrix L = psd_sqrt(V0.matrix(), kPsdTol);
  RandomStream rs(seed);
  Matrix R = rs.normal_matrix(m, n);
  // Twice-iterated Gram-Schmidt: orthonormal to machine precision, so the
  // input covariance reproduces V0 essentially exactly.
  for (int a = 0; a < m; ++a) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int b = 0; b < a; ++b) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += R(a, j) * R(b, j);
        for (int j = 0; j < n; ++j) R(a, j) -= dot * R(b, j);
      }
    }
    double norm = 0.0;
    for (int j = 0; j < n; ++j) norm += R(a, j) * R(a, j);
    norm = std::sqrt(norm);
    if (!(norm > 1e-150)) throw std::runtime_error("build_inputs: degenerate random frame");
    for (int j = 0; j < n; ++j) R(a, j) /= norm;
  }
  Matrix X = matmul(L, R);
  const double scale = std::sqrt(static_cast<double>(n));
  for (double& x : X.data) x *= scale;
  return X;
}

NetTrajectory forward_network(const NetConfig& config, const TokenCovariance& V0,
                              std::uint64_t seed) {
  config.validate();
  if (config.m != V0.dim()) {
    throw std::invalid_argument("forward_network: config.m does not match V0 dimension");
  }
  std::uint64_t sm = seed;
  const std::uint64_t input_seed = splitmix64(sm);
  RandomStream stream(splitmix64(sm));

  Matrix X = build_inputs(V0, config.m, config.n, input_seed);
  NetTrajectory traj;
  traj.v.reserve(static_cast<std::size_t>(config.d) + 1);
  traj.v.push_back(flatten(covariance_of(X, config.n)));
  traj.stop_time = static_cast<double>(config.d) / config.n;

  for (int layer = 1; layer <= config.d; ++layer) {
    Matrix next = config.explicit_weights ? explicit_layer(X, config, stream)
                                          : projected_layer(X, config, stream);
    bool finite = all_finite(next);
    TokenCovariance V(config.m);
    if (finite) {
      V = covariance_of(next, config.n);
      finite = V.finite();
    }
    if (!finite) {
      traj.nonfinite_layer = layer;
      traj.stop_layer = layer;
      traj.stop_time = static_cast<double>(layer) / config.n;
      break;
    }
    X = std::move(next);
    traj.v.push_back(flatten(V));
    if (config.stop.enabled) {
      const EigenDecomposition eig = sym_eigen(V.matrix());
      if (eig.values.front() > config.stop.eig_upper ||
          eig.values.back() < config.stop.eig_lower) {
        traj.stop_layer = layer;
        traj.stop_time = static_cast<double>(layer) / config.n;
        break;
      }
    }
  }
  // A frozen run (stop rule or non-finite state) holds its last recorded
  // covariance for the remaining layers.
  while (traj.v.size() < static_cast<std::size_t>(config.d) + 1) {
    traj.v.push_back(traj.v.back());
  }
  return traj;
}

}  // namespace covsde
