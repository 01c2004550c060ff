#pragma once

#include <cstdint>
#include <vector>

#include "covsde/coeffs.hpp"
#include "covsde/rng.hpp"
#include "covsde/symmat.hpp"

namespace covsde {

// Euler-Maruyama integration settings over the flattened covariance state.
struct SdeConfig {
  double h = 0.01;            // step size, in depth/width time units
  double horizon = 0.75;      // T = depth-to-width ratio
  double psd_tol = 1e-8;      // tolerance for the diffusion square root
  double eig_lower = 1e-4;    // stopping threshold: min eigenvalue below this
  double eig_upper = 1e4;     // stopping threshold: max eigenvalue above this
  CoeffKind kind = CoeffKind::attention;
  // Optional clipping of negative state eigenvalues after each step. Off by
  // default: clipping would mask the instabilities the stopping time detects.
  bool psd_projection = false;

  void validate() const;  // throws std::invalid_argument
};

// One integrated path: time grid, flattened state at each grid point, and
// eigenvalue traces (same length as the grid, which ends at the stopping
// point when a threshold was crossed).
struct SdeTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> v;
  std::vector<double> max_eigs;
  std::vector<double> min_eigs;
  double stop_time = 0.0;  // first crossing time, or the horizon
  bool stopped = false;
  double horizon = 0.0;
  double eig_lower = 0.0;
  double eig_upper = 0.0;
};

// One Euler-Maruyama update: flatten(V) + drift*h + sqrt(diffusion)*sqrt(h)*noise,
// unflattened (symmetric by construction). noise must hold M = m(m+1)/2
// standard normals. Throws on non-finite coefficients, h <= 0, size
// mismatches, or an indefinite diffusion matrix (propagated from psd_sqrt).
TokenCovariance em_step(const TokenCovariance& V, const DriftDiffusion& coeffs, double h,
                        const std::vector<double>& noise, double psd_tol = 1e-8);

// Integrates from V0 to the horizon or the first threshold crossing,
// whichever comes first. Coefficients are re-evaluated each step; the noise
// is a fresh M-vector per step from the stream seeded here. Crossings are
// detected on post-step states; a non-finite state counts as a crossing.
SdeTrajectory simulate_sde(const SdeConfig& config, const CoeffParams& params,
                           const TokenCovariance& V0, std::uint64_t seed);

// First grid time at which an eigenvalue trace (or a non-finite state)
// violates the trajectory's thresholds; the horizon if none does.
double stopping_time(const SdeTrajectory& trajectory);

// count independent output groups of n_out coordinates each: every column of
// the returned m x (n_out*count) matrix is an independent m-dimensional
// Gaussian with covariance V_T. Throws on indefinite V_T.
Matrix sample_output(const TokenCovariance& V_T, int n_out, int count, std::uint64_t seed);

}  // namespace covsde
