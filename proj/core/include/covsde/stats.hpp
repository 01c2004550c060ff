#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covsde/matrix.hpp"

namespace covsde {

// Results of many simulation runs under one configuration. Each terminal row
// is one flattened covariance state; trajectories (optional) hold the full
// per-sample paths as flattened states per layer/step.
struct Ensemble {
  std::string config_hash;
  std::uint64_t master_seed = 0;
  int m = 0;
  Matrix terminal{0, 0};
  std::vector<std::vector<std::vector<double>>> trajectories;

  bool has_trajectories() const { return !trajectories.empty(); }
};

// Per-layer averages across an ensemble's trajectories. mean_rho and
// mean_abs_rho average the (|)correlation(|) over all off-diagonal token
// pairs and samples; mean_abs_cov averages |V_k| over all flattened entries.
// Samples whose state at a layer is unusable (non-finite, or nonpositive
// diagonal for the correlation averages) are excluded and counted in skipped.
// Trajectories shorter than the longest one are extended by their last state.
struct CorrelationTrajectory {
  std::vector<double> mean_rho;
  std::vector<double> mean_abs_rho;
  std::vector<double> mean_abs_cov;
  long long skipped = 0;
};

// Throws std::invalid_argument if the ensemble carries no trajectories.
CorrelationTrajectory mean_correlation_trajectory(const Ensemble& ensemble);

// Per-sample terminal correlation rho^{ab} (clamped to [-1, 1]). Samples with
// non-finite entries or nonpositive diagonal are dropped; if skipped is
// non-null it receives the drop count.
std::vector<double> correlation_samples(const Ensemble& ensemble, int a, int b,
                                        long long* skipped = nullptr);

// 0.9 * min(sample std, IQR / 1.34) * count^(-1/5); returns 0 for degenerate
// spreads (fewer than 2 samples, or zero std/IQR), which kde() treats as the
// signal to fall back.
double silverman_bandwidth(const std::vector<double>& samples);

// Gaussian kernel density estimate on an evenly spaced grid spanning the
// sample range padded by 3 bandwidths. A nonpositive automatic bandwidth
// (all-equal or heavily tied samples) triggers a histogram-style fallback
// with a fixed narrow width (padded by 4 bandwidths so the lone bump keeps
// its mass), flagged via degenerate. The sampled density integrates to 1
// within 1e-3 by trapezoid rule.
struct KdeResult {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  bool degenerate = false;
};
KdeResult kde(const std::vector<double>& samples, double bandwidth = 0.0, int grid_points = 512);

// Linear-interpolation percentile (rank = p/100 * (N-1) over sorted values).
// Throws on an empty sample set or p outside [0, 100].
double percentile(const std::vector<double>& samples, double p);

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|, with
// exact handling of tied values. Throws on empty inputs.
double ks_statistic(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace covsde
