#include "covsde/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "covsde/symmat.hpp"

namespace covsde {

namespace {

bool finite_state(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      return false;
    }
  }
  return true;
}

void check_finite_samples(const std::vector<double>& samples, const char* what) {
  for (double x : samples) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument(std::string(what) + ": non-finite sample value");
    }
  }
}

}  // namespace

CorrelationTrajectory mean_correlation_trajectory(const Ensemble& ensemble) {
  if (!ensemble.has_trajectories()) {
    throw std::invalid_argument("mean_correlation_trajectory: ensemble has no trajectories");
  }
  const int m = ensemble.m;
  if (m < 1) {
    throw std::invalid_argument("mean_correlation_trajectory: invalid token count");
  }
  const FlatIndexMap map(m);
  const std::size_t flat = static_cast<std::size_t>(map.size());
  std::size_t max_len = 0;
  for (const auto& traj : ensemble.trajectories) {
    if (traj.empty()) {
      throw std::invalid_argument("mean_correlation_trajectory: empty trajectory");
    }
    for (const auto& state : traj) {
      if (state.size() != flat) {
        throw std::invalid_argument("mean_correlation_trajectory: state length mismatch");
      }
    }
    max_len = std::max(max_len, traj.size());
  }
  CorrelationTrajectory out;
  out.mean_rho.resize(max_len);
  out.mean_abs_rho.resize(max_len);
  out.mean_abs_cov.resize(max_len);
  const int pairs = m * (m - 1) / 2;
  for (std::size_t layer = 0; layer < max_len; ++layer) {
    double rho_sum = 0.0;
    double abs_rho_sum = 0.0;
    long long rho_count = 0;
    double abs_cov_sum = 0.0;
    long long abs_cov_count = 0;
    for (const auto& traj : ensemble.trajectories) {
      const std::vector<double>& state = traj[std::min(layer, traj.size() - 1)];
      if (!finite_state(state)) {
        ++out.skipped;
        continue;
      }
      double abs_accum = 0.0;
      for (double x : state) {
        abs_accum += std::abs(x);
      }
      abs_cov_sum += abs_accum / static_cast<double>(flat);
      ++abs_cov_count;
      if (pairs == 0) {
        continue;
      }
      bool usable = true;
      for (int a = 0; a < m && usable; ++a) {
        if (!(state[static_cast<std::size_t>(map.index(a, a))] > 0.0)) {
          usable = false;
        }
      }
      if (!usable) {
        ++out.skipped;
        continue;
      }
      double sample_rho = 0.0;
      double sample_abs = 0.0;
      for (int a = 0; a < m; ++a) {
        for (int b = a + 1; b < m; ++b) {
          const double denom =
              std::sqrt(state[static_cast<std::size_t>(map.index(a, a))] *
                        state[static_cast<std::size_t>(map.index(b, b))]);
          const double rho = state[static_cast<std::size_t>(map.index(a, b))] / denom;
          sample_rho += rho;
          sample_abs += std::abs(rho);
        }
      }
      rho_sum += sample_rho / static_cast<double>(pairs);
      abs_rho_sum += sample_abs / static_cast<double>(pairs);
      ++rho_count;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.mean_rho[layer] = rho_count > 0 ? rho_sum / static_cast<double>(rho_count) : nan;
    out.mean_abs_rho[layer] = rho_count > 0 ? abs_rho_sum / static_cast<double>(rho_count) : nan;
    out.mean_abs_cov[layer] =
        abs_cov_count > 0 ? abs_cov_sum / static_cast<double>(abs_cov_count) : nan;
  }
  return out;
}

std::vector<double> correlation_samples(const Ensemble& ensemble, int a, int b,
                                        long long* skipped) {
  const int m = ensemble.m;
  if (a < 0 || a >= m || b < 0 || b >= m || a == b) {
    throw std::out_of_range("correlation_samples: token pair out of range");
  }
  const FlatIndexMap map(m);
  if (ensemble.terminal.cols != map.size()) {
    throw std::invalid_argument("correlation_samples: terminal state width mismatch");
  }
  const int aa = map.index(a, a);
  const int bb = map.index(b, b);
  const int ab = map.index(a, b);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(ensemble.terminal.rows));
  long long dropped = 0;
  for (int s = 0; s < ensemble.terminal.rows; ++s) {
    const double vaa = ensemble.terminal(s, aa);
    const double vbb = ensemble.terminal(s, bb);
    const double vab = ensemble.terminal(s, ab);
    if (!std::isfinite(vaa) || !std::isfinite(vbb) || !std::isfinite(vab) || !(vaa > 0.0) ||
        !(vbb > 0.0)) {
      ++dropped;
      continue;
    }
    const double rho = vab / std::sqrt(vaa * vbb);
    out.push_back(std::clamp(rho, -1.0, 1.0));
  }
  if (skipped != nullptr) {
    *skipped = dropped;
  }
  return out;
}

double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.size() < 2) {
    return 0.0;
  }
  check_finite_samples(samples, "silverman_bandwidth");
  const double count = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double x : samples) {
    mean += x;
  }
  mean /= count;
  double ss = 0.0;
  for (double x : samples) {
    ss += (x - mean) * (x - mean);
  }
  const double sd = std::sqrt(ss / (count - 1.0));
  const double iqr = percentile(samples, 75.0) - percentile(samples, 25.0);
  const double spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(count, -0.2);
}

KdeResult kde(const std::vector<double>& samples, double bandwidth, int grid_points) {
  if (samples.empty()) {
    throw std::invalid_argument("kde: empty sample set");
  }
  if (grid_points < 2) {
    throw std::invalid_argument("kde: need at least 2 grid points");
  }
  check_finite_samples(samples, "kde");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  KdeResult out;
  double bw = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  if (!(bw > 0.0)) {
    // Degenerate spread (all-equal or heavily tied samples): smooth with a
    // fixed narrow width instead, the continuous analogue of a histogram.
    out.degenerate = true;
    const double range = hi - lo;
    const double scale = std::max({std::abs(lo), std::abs(hi), 1.0});
    bw = range > 0.0 ? range / 64.0 : scale * 1e-9;
  }
  out.bandwidth = bw;
  // Three bandwidths of padding suffice for spread-out samples (only edge
  // kernels lose tail mass). The degenerate fallback is a single bump, so it
  // needs four to keep the trapezoid integral within 1e-3 of 1.
  const double pad = out.degenerate ? 4.0 : 3.0;
  const double glo = lo - pad * bw;
  const double ghi = hi + pad * bw;
  const double step = (ghi - glo) / static_cast<double>(grid_points - 1);
  out.grid.resize(static_cast<std::size_t>(grid_points));
  out.density.resize(static_cast<std::size_t>(grid_points));
  const double norm =
      1.0 / (static_cast<double>(samples.size()) * bw * std::sqrt(2.0 * std::numbers::pi));
  for (int i = 0; i < grid_points; ++i) {
    const double g = glo + step * static_cast<double>(i);
    double acc = 0.0;
    for (double x : samples) {
      const double t = (g - x) / bw;
      acc += std::exp(-0.5 * t * t);
    }
    out.grid[static_cast<std::size_t>(i)] = g;
    out.density[static_cast<std::size_t>(i)] = acc * norm;
  }
  return out;
}

double percentile(const std::vector<double>& samples, double p) {
  if (samples.empty()) {
    throw std::invalid_argument("percentile: empty sample set");
  }
  if (!(p >= 0.0 && p <= 100.0)) {
    throw std::domain_error("percentile: p outside [0, 100]");
  }
  check_finite_samples(samples, "percentile");
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  const double rank = p / 100.0 * static_cast<double>(s.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("ks_statistic: empty sample set");
  }
  check_finite_samples(a, "ks_statistic");
  check_finite_samples(b, "ks_statistic");
  std::vector<double> sa = a;
  std::vector<double> sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) {
      ++i;
    }
    while (j < sb.size() && sb[j] == x) {
      ++j;
    }
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace covsde
