#include "covsde/sdesim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace covsde {
namespace {

bool finite_vector(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void SdeConfig::validate() const {
  if (!(h > 0.0) || !(horizon > 0.0) || h > horizon + 1e-15) {
    throw std::invalid_argument("SdeConfig: need 0 < h <= horizon");
  }
  if (!(psd_tol > 0.0)) throw std::invalid_argument("SdeConfig: psd_tol must be positive");
  if (!(eig_lower > 0.0 && eig_lower < eig_upper)) {
    throw std::invalid_argument("SdeConfig: thresholds must satisfy 0 < lower < upper");
  }
}

TokenCovariance em_step(const TokenCovariance& V, const DriftDiffusion& coeffs, double h,
                        const std::vector<double>& noise, double psd_tol) {
  const FlatIndexMap map(V.dim());
  const std::size_t M = static_cast<std::size_t>(map.size());
  if (coeffs.drift.size() != M || noise.size() != M ||
      coeffs.diffusion.rows != map.size() || coeffs.diffusion.cols != map.size()) {
    throw std::invalid_argument("em_step: coefficient/noise sizes do not match the state");
  }
  if (!(h > 0.0)) throw std::invalid_argument("em_step: h must be positive");
  if (!finite_vector(coeffs.drift) || !all_finite(coeffs.diffusion)) {
    throw std::invalid_argument("em_step: coefficients must be finite");
  }
  const Matrix root = psd_sqrt(coeffs.diffusion, psd_tol);
  std::vector<double> v = flatten(V);
  const double sqrt_h = std::sqrt(h);
  for (std::size_t k = 0; k < M; ++k) {
    double diff = 0.0;
    for (std::size_t l = 0; l < M; ++l) {
      diff += root(static_cast<int>(k), static_cast<int>(l)) * noise[l];
    }
    v[k] += coeffs.drift[k] * h + sqrt_h * diff;
  }
  return unflatten(v, V.dim());
}

SdeTrajectory simulate_sde(const SdeConfig& config, const CoeffParams& params,
                           const TokenCovariance& V0, std::uint64_t seed) {
  config.validate();
  params.validate();
  const int m = V0.dim();
  if (params.m != m) {
    throw std::invalid_argument("simulate_sde: params.m does not match V0 dimension");
  }
  {
    const EigenDecomposition eig0 = sym_eigen(V0.matrix());
    const double scale = std::max(1.0, std::abs(eig0.values.front()));
    if (eig0.values.back() < -config.psd_tol * scale) {
      throw std::invalid_argument("simulate_sde: V0 must be positive semidefinite");
    }
  }
  const FlatIndexMap map(m);
  const std::size_t M = static_cast<std::size_t>(map.size());
  RandomStream stream(seed);

  SdeTrajectory traj;
  traj.horizon = config.horizon;
  traj.eig_lower = config.eig_lower;
  traj.eig_upper = config.eig_upper;
  traj.stop_time = config.horizon;

  TokenCovariance V = V0;
  const auto record = [&](double t) {
    traj.times.push_back(t);
    traj.v.push_back(flatten(V));
    if (V.finite()) {
      const EigenDecomposition eig = sym_eigen(V.matrix());
      traj.max_eigs.push_back(eig.values.front());
      traj.min_eigs.push_back(eig.values.back());
    } else {
      traj.max_eigs.push_back(std::numeric_limits<double>::quiet_NaN());
      traj.min_eigs.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  };
  record(0.0);

  const int steps = static_cast<int>(std::ceil(config.horizon / config.h - 1e-12));
  std::vector<double> noise(M);
  for (int step = 0; step < steps; ++step) {
    const double t_next = std::min((step + 1) * config.h, config.horizon);
    const double hh = t_next - step * config.h;
    const DriftDiffusion coeffs = sde_coeffs(config.kind, V, params);
    stream.fill_normal(noise.data(), M);
    V = em_step(V, coeffs, hh, noise, config.psd_tol);
    if (config.psd_projection && V.finite()) {
      const EigenDecomposition eig = sym_eigen(V.matrix());
      if (eig.values.back() < 0.0) {
        Matrix proj(m, m);
        for (int i = 0; i < m; ++i) {
          for (int j = i; j < m; ++j) {
            double s = 0.0;
            for (int r = 0; r < m; ++r) {
              s += eig.vectors(i, r) * std::max(0.0, eig.values[static_cast<std::size_t>(r)]) *
                   eig.vectors(j, r);
            }
            proj(i, j) = s;
            proj(j, i) = s;
          }
        }
        V = TokenCovariance::from_matrix(proj);
      }
    }
    record(t_next);
    const bool bad = !V.finite() || traj.max_eigs.back() > config.eig_upper ||
                     traj.min_eigs.back() < config.eig_lower;
    if (bad) {
      traj.stopped = true;
      traj.stop_time = t_next;
      break;
    }
  }
  return traj;
}

double stopping_time(const SdeTrajectory& trajectory) {
  if (trajectory.times.empty()) {
    throw std::invalid_argument("stopping_time: empty trajectory");
  }
  for (std::size_t i = 1; i < trajectory.times.size(); ++i) {
    const bool bad = !finite_vector(trajectory.v[i]) ||
                     !(trajectory.max_eigs[i] <= trajectory.eig_upper) ||
                     !(trajectory.min_eigs[i] >= trajectory.eig_lower);
    if (bad) return trajectory.times[i];
  }
  return trajectory.horizon;
}

Matrix sample_output(const TokenCovariance& V_T, int n_out, int count, std::uint64_t seed) {
  if (n_out < 1 || count < 1) {
    throw std::invalid_argument("sample_output: n_out and count must be >= 1");
  }
  const Matrix L = psd_sqrt(V_T.matrix(), 1e-8);
  RandomStream stream(seed);
  const Matrix G = stream.normal_matrix(V_T.dim(), n_out * count);
  return matmul(L, G);
}

}  // namespace covsde
