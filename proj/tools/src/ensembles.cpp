#include <limits>
#include <stdexcept>

#include "covsde/parallel.hpp"
#include "covsde/rng.hpp"
#include "covsde_tools/drivers.hpp"

namespace covsde_tools {

using covsde::Ensemble;
using covsde::FlatIndexMap;
using covsde::Matrix;
using covsde::RandomStream;
using covsde::TokenCovariance;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  return RandomStream::substream(master, salt).bits();
}

TokenCovariance equicorrelated_v0(int m, double rho0, double scale) {
  if (m < 1) throw std::invalid_argument("equicorrelated_v0: m must be at least 1");
  if (!(scale > 0.0)) throw std::invalid_argument("equicorrelated_v0: scale must be positive");
  // PSD requires rho0 in [-1/(m-1), 1] for the equicorrelated family.
  if (m > 1 && (rho0 > 1.0 || rho0 < -1.0 / (m - 1))) {
    throw std::invalid_argument("equicorrelated_v0: rho0 outside the positive-definite range");
  }
  TokenCovariance v(m);
  for (int a = 0; a < m; ++a) {
    for (int b = a; b < m; ++b) v.set(a, b, scale * (a == b ? 1.0 : rho0));
  }
  return v;
}

namespace {

int checked_sample_count(long long samples) {
  if (samples < 1 || samples > std::numeric_limits<int>::max()) {
    throw std::invalid_argument("ensemble: sample count must be in [1, INT_MAX]");
  }
  return static_cast<int>(samples);
}

}  // namespace

Ensemble run_net_ensemble(const covsde::NetConfig& config, const TokenCovariance& v0,
                          long long samples, std::uint64_t master_seed, bool keep_trajectories,
                          std::vector<double>* stop_times) {
  config.validate();
  const int count = checked_sample_count(samples);
  const FlatIndexMap map(config.m);
  Ensemble ensemble;
  ensemble.m = config.m;
  ensemble.master_seed = master_seed;
  ensemble.terminal = Matrix(count, map.size());
  if (keep_trajectories) ensemble.trajectories.resize(static_cast<std::size_t>(count));
  if (stop_times) stop_times->assign(static_cast<std::size_t>(count), 0.0);
  covsde::parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    covsde::NetTrajectory trajectory = covsde::forward_network(config, v0, seed);
    const std::vector<double>& last = trajectory.v.back();
    for (int k = 0; k < map.size(); ++k) {
      ensemble.terminal(static_cast<int>(i), k) = last[static_cast<std::size_t>(k)];
    }
    if (stop_times) (*stop_times)[i] = trajectory.stop_time;
    if (keep_trajectories) ensemble.trajectories[i] = std::move(trajectory.v);
  });
  return ensemble;
}

Ensemble run_sde_ensemble(const covsde::SdeConfig& config, const covsde::CoeffParams& params,
                          const TokenCovariance& v0, long long samples, std::uint64_t master_seed,
                          bool keep_trajectories, std::vector<double>* stop_times) {
  config.validate();
  params.validate();
  const int count = checked_sample_count(samples);
  const FlatIndexMap map(v0.dim());
  Ensemble ensemble;
  ensemble.m = v0.dim();
  ensemble.master_seed = master_seed;
  ensemble.terminal = Matrix(count, map.size());
  if (keep_trajectories) ensemble.trajectories.resize(static_cast<std::size_t>(count));
  if (stop_times) stop_times->assign(static_cast<std::size_t>(count), 0.0);
  covsde::parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    covsde::SdeTrajectory trajectory = covsde::simulate_sde(config, params, v0, seed);
    const std::vector<double>& last = trajectory.v.back();
    for (int k = 0; k < map.size(); ++k) {
      ensemble.terminal(static_cast<int>(i), k) = last[static_cast<std::size_t>(k)];
    }
    if (stop_times) (*stop_times)[i] = trajectory.stop_time;
    if (keep_trajectories) ensemble.trajectories[i] = std::move(trajectory.v);
  });
  return ensemble;
}

}  // namespace covsde_tools
