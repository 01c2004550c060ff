#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "covsde/coeffs.hpp"
#include "covsde/finitenet.hpp"
#include "covsde/symmat.hpp"

namespace covsde {

// One Monte Carlo estimate with its standard error (sample std / sqrt(count)).
struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long long samples = 0;
};

// Brute-force check of the logit second-moment identity
// E[Y^{ab} Y^{dw}] = n_k V^{ad} V^{bw} using explicit weight matrices
// (never the projected shortcut — these estimates certify it). X is built
// from V once; Wq, Wk are redrawn per sample.
MomentEstimate estimate_y_moment(const TokenCovariance& V, int alpha, int beta, int delta,
                                 int omega, int n, int n_k, long long samples,
                                 std::uint64_t seed);

// E[Y^{ab}] (targets zero: odd moment in the weights).
MomentEstimate estimate_y_mean(const TokenCovariance& V, int alpha, int beta, int n, int n_k,
                               long long samples, std::uint64_t seed);

// Batched variant reusing one Y draw per sample for many targets; the suite
// driver uses this so the whole family costs a single pass.
struct YMomentBatch {
  std::vector<MomentEstimate> products;  // aligned with product_tuples (a,b,d,w)
  std::vector<MomentEstimate> means;     // aligned with mean_tuples (a,b)
};
YMomentBatch estimate_y_moment_batch(const TokenCovariance& V,
                                     const std::vector<std::array<int, 4>>& product_tuples,
                                     const std::vector<std::array<int, 2>>& mean_tuples,
                                     int n, int n_k, long long samples, std::uint64_t seed);

// Monte Carlo estimates of the centered softmax-expansion moments from
// explicit-weight logits: with F1^{ad} = Y^{ad} - rowmean_a(Y),
//   s1 target: E[F1^{ad} F1^{bw}] / n_k
//   s2 target: E[(F1^{ad})^2 - avg_w (F1^{aw})^2] / n_k
// Both are unbiased for the closed forms at any finite n (the second moments
// of Y are exact, not asymptotic). Estimates are indexed (a*m+d, b*m+w) for
// s1 and (a,d) for s2.
struct TaylorMoments {
  int m = 0;
  Matrix s1_mean{0, 0};
  Matrix s1_se{0, 0};
  Matrix s2_mean{0, 0};
  Matrix s2_se{0, 0};
  long long samples = 0;
};
TaylorMoments estimate_taylor_moments(const TokenCovariance& V, int n, int n_k,
                                      long long samples, std::uint64_t seed);

// Estimates n*(c*K1(rho) - rho), the finite-width excess of the normalized
// activation cross-moment, which converges to nu(rho). A control variate
// replaces the O(sqrt(n)) terms by their exact expectations, so the variance
// is O(1) in n and the estimator mean is exact for the finite-n quantity.
MomentEstimate estimate_k1(double rho, double cplus, double cminus, int n, long long samples,
                           std::uint64_t seed);

// Conditional one-layer update moments at fixed input covariance:
// drift[k] estimates n*E[dV_k] and diffusion(k,l) estimates n*Cov[dV_k, dV_l],
// the quantities the limiting coefficients predict.
struct OneStepMoments {
  std::vector<MomentEstimate> drift;
  Matrix diffusion{0, 0};
  Matrix diffusion_se{0, 0};
  long long samples = 0;
};
OneStepMoments one_step_moments(CoeffKind layer_kind, const TokenCovariance& V0, int n, int n_k,
                                const NetConfig& config, long long samples, std::uint64_t seed);

// Isolates the temperature-scaled diffusion correction of the attention
// layer: runs the attention update at lambda=0, gamma=1, subtracts the
// linear part sigma_lin(V) from n*Cov[dV], and reports the remainder, which
// targets tau0^{-2} * a_matrix(V).
struct T2CovEstimate {
  Matrix estimate{0, 0};
  Matrix std_error{0, 0};
  long long samples = 0;
};
T2CovEstimate estimate_t2_cov(const TokenCovariance& V, int n, int n_k, double tau0,
                              long long samples, std::uint64_t seed);

}  // namespace covsde
