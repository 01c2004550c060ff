#pragma once

#include <vector>

#include "covsde/symmat.hpp"

namespace covsde {

// Scalars entering the limiting drift/diffusion coefficients.
struct CoeffParams {
  double gamma = 1.0;   // residual branch strength, in [0,1]
  double tau0 = 1.0;    // temperature constant, > 0
  double cplus = 0.0;   // positive-side activation slope offset
  double cminus = 0.0;  // negative-side activation slope offset
  int m = 2;            // token count

  void validate() const;  // throws std::invalid_argument on violation
};

// Evaluated coefficients over the flattened covariance state:
// drift vector of length M = m(m+1)/2 and symmetric PSD diffusion matrix.
struct DriftDiffusion {
  std::vector<double> drift;
  Matrix diffusion{0, 0};
};

// Which limiting dynamics the coefficients describe.
enum class CoeffKind { resnet, attention, transformer };

// Correlation-shape function of the activation drift:
// nu(rho) = ((c+ - c-)^2 / 2pi) * (sqrt(1-rho^2) - rho*acos(rho)).
// nu(1) = 0 exactly; throws std::domain_error when |rho| > 1 + 1e-12.
double nu(double rho, double cplus, double cminus);

// Activation-layer drift, flattened: entry (a,b) is nu(rho^{ab}) *
// sqrt(V^{aa} V^{bb}) — WITHOUT the branch-strength factor, which the caller
// applies. Diagonal entries are exactly 0. Throws std::domain_error when the
// diagonal of V is not strictly positive.
std::vector<double> b_relu(const TokenCovariance& V, double cplus, double cminus);

// Linear-layer diffusion: Sigma_lin[(a,b),(d,w)] = V^{ad}V^{bw} + V^{aw}V^{bd},
// an M x M symmetric PSD matrix (no branch-strength factor).
Matrix sigma_lin(const TokenCovariance& V);

// Centered softmax-expansion moments. With row means V^{a.}, grand mean V^{..}
// and diagonal mean Vbar:
//   s1(a,d,b,w) = V^{ab} (V^{dw} - V^{d.} - V^{w.} + V^{..})
//   s2(a,d)     = V^{aa} (V^{dd} - 2V^{d.} + 2V^{..} - Vbar)
// Indices are 0-based and range-checked.
double s1(const TokenCovariance& V, int alpha, int delta, int beta, int omega);
double s2(const TokenCovariance& V, int alpha, int delta);

// Attention-layer drift, flattened; includes the gamma^2 / tau0^2 prefactor.
// Entry (a,b) = (g^2/t0^2) [ (1/m^2) sum_{v,k} V^{vk} s1(a,v,b,k)
//                          + (1/2m) sum_v (V^{bv} s2(a,v) + V^{av} s2(b,v)) ].
std::vector<double> b_attn(const TokenCovariance& V, const CoeffParams& params);

// Attention diffusion correction tensor (gamma- and tau0-free):
// A[(a,b),(d,w)] = (1/m^2) sum_{v,k} ( V^{ak}V^{dv} s1(b,k,w,v)
//                                    + V^{ak}V^{wv} s1(b,k,d,v)
//                                    + V^{bv}V^{dk} s1(a,v,w,k)
//                                    + V^{bv}V^{wk} s1(a,v,d,k) ).
// a_tensor evaluates one entry; a_matrix assembles the full M x M matrix.
double a_tensor(const TokenCovariance& V, int alpha, int beta, int delta, int omega);
Matrix a_matrix(const TokenCovariance& V);

// Attention-layer diffusion: g^2(2-g^2) Sigma_lin + (g^4/t0^2) A, symmetrized.
// Throws std::domain_error if the result is indefinite beyond a relative
// tolerance of 1e-8 (a coefficient-bug signal, never silently clipped).
Matrix sigma_attn(const TokenCovariance& V, const CoeffParams& params);

// Full coefficient sets over the flattened state.
//   resnet:      { g^2 b_relu,           2 g^2 Sigma_lin }
//   attention:   { b_attn,               sigma_attn }
//   transformer: entrywise sums of the two.
DriftDiffusion resnet_coeffs(const TokenCovariance& V, const CoeffParams& params);
DriftDiffusion attention_coeffs(const TokenCovariance& V, const CoeffParams& params);
DriftDiffusion transformer_coeffs(const TokenCovariance& V, const CoeffParams& params);
DriftDiffusion sde_coeffs(CoeffKind kind, const TokenCovariance& V, const CoeffParams& params);

}  // namespace covsde
