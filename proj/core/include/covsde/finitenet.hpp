#pragma once

#include <cstdint>
#include <vector>

#include "covsde/rng.hpp"
#include "covsde/symmat.hpp"

namespace covsde {

// Forward-pass architecture families.
enum class NetVariant {
  shaped_attention,   // residual attention with identity/centering/wide-temperature
  vanilla_softmax,    // residual attention with plain row-wise softmax
  pre_ln,             // residual attention with layer-normalized branch input
  resnet_relu,        // residual MLP with shaped ReLU
  shaped_transformer  // shaped attention sublayer followed by the MLP sublayer
};

// Individually disables the three attention modifications (ablation study).
struct AttentionToggles {
  bool use_identity = true;          // add gamma1 * I
  bool use_centering = true;         // subtract gamma2 * (1/m) 11^T
  bool use_wide_temperature = true;  // tau = tau0*sqrt(n*n_k); off: tau = sqrt(n_k)
};

// Eigenvalue exit thresholds for stopping-time experiments.
struct StopRule {
  bool enabled = false;
  double eig_lower = 1e-4;
  double eig_upper = 1e4;
};

// All architecture scalars for one forward simulation.
struct NetConfig {
  int n = 300;    // width
  int d = 100;    // depth (number of blocks)
  int m = 2;      // tokens
  int n_k = 64;   // key/query dimension
  double lambda = 0.7071067811865476;  // residual trunk weight
  double gamma = 0.7071067811865476;   // residual branch weight
  double tau0 = 1.0;                   // temperature constant
  double cplus = 0.0;                  // ReLU shaping, positive side
  double cminus = 0.0;                 // ReLU shaping, negative side
  double gamma1 = 1.0;                 // identity multiplier
  double gamma2 = 1.0;                 // centering multiplier
  NetVariant variant = NetVariant::shaped_attention;
  AttentionToggles toggles;
  StopRule stop;
  // When set, validate() insists on lambda^2 + gamma^2 = 1 (the scaling the
  // limit theory assumes); the Pre-LN baseline runs with it unset.
  bool enforce_branch_norm = false;
  // Sample explicit n x n weight matrices instead of the projected update
  // (see forward_network below). Much slower; kept for cross-validation.
  bool explicit_weights = false;

  void validate() const;  // throws std::invalid_argument
};

// One block's explicit weight matrices, all entries i.i.d. standard normal.
struct LayerWeights {
  Matrix wq{0, 0};     // n x n_k
  Matrix wk{0, 0};     // n x n_k
  Matrix wv{0, 0};     // n x n
  Matrix wpre{0, 0};   // n x n
  Matrix wpost{0, 0};  // n x n
};

// Draw order is fixed (wq, wk, wv, wpre, wpost; each row-major) so a seed
// pins the full weight sequence.
LayerWeights sample_layer_weights(RandomStream& stream, int n, int n_k);

// Covariance trajectory of one forward pass: flattened V at layers 0..d.
struct NetTrajectory {
  std::vector<std::vector<double>> v;  // d+1 entries of length m(m+1)/2
  int stop_layer = -1;      // first layer whose state crossed the stop rule
  int nonfinite_layer = -1; // first layer whose state stopped being finite
  double stop_time = 0.0;   // stop_layer/n, or d/n if never stopped
};

// Leaky activation with slopes 1 + c/sqrt(n) on each side.
double shaped_relu(double x, double cplus, double cminus, int n);

// Normalizer keeping activations at unit scale: 1 / ((s+^2 + s-^2)/2).
double he_constant(double cplus, double cminus, int n);

// Y = X Wq Wk^T X^T / n. Throws std::invalid_argument on shape mismatch.
Matrix attention_logits(const Matrix& X, const Matrix& wq, const Matrix& wk, int n);

// Row-wise softmax with max subtraction (rows sum to 1 within 1e-12).
Matrix softmax_rows(const Matrix& Y);

// A = gamma1*I + Softmax(Y/tau) - gamma2*(1/m) 11^T, with each modification
// individually removable through the toggles. Zero logits with
// gamma1 = gamma2 = 1 give exactly the identity matrix.
Matrix shaped_attention_matrix(const Matrix& Y, double tau0, int n, int n_k,
                               double gamma1, double gamma2,
                               const AttentionToggles& toggles);

// Per-token standardization (mean removal and variance normalization, no
// learned affine) used by the Pre-LN baseline.
Matrix layer_norm_rows(const Matrix& X);

// Explicit-weight layer maps (X is m x n; X' has the same shape):
//   attention:  X' = lambda X + gamma A Z wv / sqrt(n),  Z = branch input
//   resnet:     X' = lambda X + gamma sqrt(c) sigma_s(X wpre / sqrt(n)) wpost / sqrt(n)
//   block:      attention sublayer, then resnet sublayer (same weights struct)
// The attention matrix A follows config.variant (shaped, plain softmax, or
// Pre-LN with Z = layer_norm_rows(X)).
Matrix attention_layer(const Matrix& X, const LayerWeights& weights, const NetConfig& config);
Matrix resnet_layer(const Matrix& X, const LayerWeights& weights, const NetConfig& config);
Matrix transformer_block(const Matrix& X, const LayerWeights& weights, const NetConfig& config);

// Projected update: statistically identical to the explicit maps (the branch
// is Gaussian given the current state, with covariance determined by V alone),
// but drawing O(m(n + n_k)) normals per layer instead of O(n^2). This is what
// forward_network uses unless config.explicit_weights is set.
Matrix projected_layer(const Matrix& X, const NetConfig& config, RandomStream& stream);

// X0 (m x n) with (1/n) X0 X0^T = V0 to 1e-10: PSD square root of V0 applied
// to sqrt(n)-scaled rows of a random orthonormal frame. Throws on m > n or
// indefinite V0.
Matrix build_inputs(const TokenCovariance& V0, int m, int n, std::uint64_t seed);

// Full forward pass recording the covariance after every block. Deterministic
// given (config, seed); fresh weights per layer. Non-finite states freeze the
// trajectory at the last finite value (nonfinite_layer records where); the
// stop rule, when enabled, freezes it after the first threshold crossing.
NetTrajectory forward_network(const NetConfig& config, const TokenCovariance& V0,
                              std::uint64_t seed);

}  // namespace covsde
