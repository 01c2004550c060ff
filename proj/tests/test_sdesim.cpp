#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "covsde/coeffs.hpp"
#include "covsde/matrix.hpp"
#include "covsde/rng.hpp"
#include "covsde/sdesim.hpp"
#include "covsde/stats.hpp"
#include "covsde/symmat.hpp"
#include "doctest.h"

using namespace covsde;

namespace {

TokenCovariance make_cov(int m, const std::vector<double>& entries) {
  Matrix a(m, m);
  a.data = entries;
  return TokenCovariance::from_matrix(a);
}

CoeffParams resnet_params(double gamma) {
  CoeffParams p;
  p.gamma = gamma;
  p.cplus = 0.0;
  p.cminus = -1.0;
  p.m = 2;
  return p;
}

}  // namespace

TEST_CASE("em_step with zero drift and zero diffusion returns the state unchanged") {
  const TokenCovariance v = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  DriftDiffusion coeffs;
  coeffs.drift = {0.0, 0.0, 0.0};
  coeffs.diffusion = Matrix(3, 3);
  const std::vector<double> noise = {0.3, -0.7, 1.1};
  const TokenCovariance out = em_step(v, coeffs, 0.01, noise);
  CHECK(flatten(out) == flatten(v));
}

TEST_CASE("em_step with zero diffusion is the deterministic Euler update") {
  const TokenCovariance v = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  DriftDiffusion coeffs;
  coeffs.drift = {2.0, -1.0, 0.5};
  coeffs.diffusion = Matrix(3, 3);
  const std::vector<double> noise = {5.0, 5.0, 5.0};  // must be ignored
  const TokenCovariance out = em_step(v, coeffs, 0.1, noise);
  CHECK(out(0, 0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(out(1, 1) == doctest::Approx(1.05).epsilon(1e-15));
}

TEST_CASE("zero-noise attention step from the identity adds 0.0025 on the diagonal") {
  // Drift of the attention dynamics at the 2x2 identity with gamma = tau0 = 1
  // is (0.25, 0, 0.25); an h = 0.01 step with zero noise moves only the diag.
  const TokenCovariance v = make_cov(2, {1.0, 0.0, 0.0, 1.0});
  CoeffParams params;
  params.gamma = 1.0;
  params.tau0 = 1.0;
  params.m = 2;
  const DriftDiffusion coeffs = sde_coeffs(CoeffKind::attention, v, params);
  const std::vector<double> noise = {0.0, 0.0, 0.0};
  const TokenCovariance out = em_step(v, coeffs, 0.01, noise);
  CHECK(out(0, 0) == doctest::Approx(1.0025).epsilon(1e-12));
  CHECK(out(1, 1) == doctest::Approx(1.0025).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
}

TEST_CASE("em_step validates sizes, step, and coefficient finiteness") {
  const TokenCovariance v = make_cov(2, {1.0, 0.0, 0.0, 1.0});
  DriftDiffusion coeffs;
  coeffs.drift = {0.0, 0.0, 0.0};
  coeffs.diffusion = Matrix(3, 3);
  const std::vector<double> noise = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(em_step(v, coeffs, 0.0, noise), std::invalid_argument);
  CHECK_THROWS_AS(em_step(v, coeffs, 0.01, {0.0, 0.0}), std::invalid_argument);
  DriftDiffusion short_coeffs = coeffs;
  short_coeffs.drift = {0.0};
  CHECK_THROWS_AS(em_step(v, short_coeffs, 0.01, noise), std::invalid_argument);
  DriftDiffusion bad = coeffs;
  bad.drift[0] = std::nan("");
  CHECK_THROWS_AS(em_step(v, bad, 0.01, noise), std::invalid_argument);
}

TEST_CASE("deterministic Euler error halves with the step (first-order accuracy)") {
  // Integrate the drift-only dynamics dV = b(V) dt and compare endpoint
  // errors at h, h/2, h/4 via successive differences.
  const CoeffParams params = resnet_params(1.0);
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  const double horizon = 0.5;
  const std::vector<double> zero_noise = {0.0, 0.0, 0.0};

  const auto integrate = [&](double h) {
    TokenCovariance v = v0;
    const int steps = static_cast<int>(std::lround(horizon / h));
    for (int s = 0; s < steps; ++s) {
      DriftDiffusion coeffs = sde_coeffs(CoeffKind::resnet, v, params);
      // Zero the diffusion so the only update is the deterministic drift.
      coeffs.diffusion = Matrix(3, 3);
      v = em_step(v, coeffs, h, zero_noise);
    }
    return flatten(v);
  };

  const std::vector<double> a = integrate(0.02);
  const std::vector<double> b = integrate(0.01);
  const std::vector<double> c = integrate(0.005);
  double e1 = 0.0;
  double e2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    e1 = std::max(e1, std::abs(a[k] - b[k]));
    e2 = std::max(e2, std::abs(b[k] - c[k]));
  }
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("simulate_sde at gamma = 0 leaves the state untouched") {
  CoeffParams params = resnet_params(0.0);
  SdeConfig config;
  config.kind = CoeffKind::resnet;
  config.h = 0.01;
  config.horizon = 0.3;
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  const SdeTrajectory traj = simulate_sde(config, params, v0, 123u);
  REQUIRE(traj.v.size() == 31);
  const std::vector<double> flat0 = flatten(v0);
  for (const auto& state : traj.v) CHECK(state == flat0);
  CHECK_FALSE(traj.stopped);
  CHECK(traj.stop_time == config.horizon);
}

TEST_CASE("simulate_sde records a ceil(T/h) grid with a short final step") {
  CoeffParams params = resnet_params(0.5);
  SdeConfig config;
  config.kind = CoeffKind::resnet;
  config.h = 0.1;
  config.horizon = 0.33;
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  const SdeTrajectory traj = simulate_sde(config, params, v0, 5u);
  REQUIRE(traj.times.size() == 5);
  CHECK(traj.times[0] == 0.0);
  CHECK(traj.times[1] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(traj.times[3] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(traj.times[4] == doctest::Approx(0.33).epsilon(1e-14));
  CHECK(traj.v.size() == traj.times.size());
  CHECK(traj.max_eigs.size() == traj.times.size());
  CHECK(traj.min_eigs.size() == traj.times.size());
}

TEST_CASE("simulate_sde is seed-deterministic") {
  CoeffParams params = resnet_params(1.0 / std::sqrt(2.0));
  SdeConfig config;
  config.kind = CoeffKind::resnet;
  config.h = 0.01;
  config.horizon = 0.25;
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  const SdeTrajectory a = simulate_sde(config, params, v0, 7u);
  const SdeTrajectory b = simulate_sde(config, params, v0, 7u);
  REQUIRE(a.v.size() == b.v.size());
  for (std::size_t s = 0; s < a.v.size(); ++s) CHECK(a.v[s] == b.v[s]);
  const SdeTrajectory c = simulate_sde(config, params, v0, 8u);
  CHECK(a.v.back() != c.v.back());
}

TEST_CASE("stopping_time scans threshold crossings and non-finite states") {
  SUBCASE("trajectory that never crosses returns the horizon") {
    CoeffParams params = resnet_params(0.25);
    SdeConfig config;
    config.kind = CoeffKind::resnet;
    config.h = 0.01;
    config.horizon = 0.2;
    const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
    const SdeTrajectory traj = simulate_sde(config, params, v0, 21u);
    CHECK_FALSE(traj.stopped);
    CHECK(stopping_time(traj) == config.horizon);
    CHECK(traj.stop_time == config.horizon);
  }
  SUBCASE("state starting beyond the threshold stops at the first grid point") {
    CoeffParams params = resnet_params(0.25);
    SdeConfig config;
    config.kind = CoeffKind::resnet;
    config.h = 0.01;
    config.horizon = 0.2;
    config.eig_upper = 10.0;
    const TokenCovariance v0 = make_cov(2, {100.0, 0.0, 0.0, 100.0});
    const SdeTrajectory traj = simulate_sde(config, params, v0, 22u);
    CHECK(traj.stopped);
    CHECK(traj.stop_time == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(stopping_time(traj) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(traj.times.size() == 2);  // integration halts at the crossing
  }
  SUBCASE("recomputed stopping time agrees with the recorded one") {
    CoeffParams params;
    params.gamma = 0.5;
    params.tau0 = 1.0;
    params.m = 2;
    SdeConfig config;
    config.kind = CoeffKind::attention;
    config.h = 0.01;
    config.horizon = 1.0;
    config.eig_upper = 2.5;  // tight box so some runs stop mid-horizon
    config.eig_lower = 0.2;
    const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
    int stopped_runs = 0;
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
      const SdeTrajectory traj = simulate_sde(config, params, v0, seed);
      CHECK(stopping_time(traj) == traj.stop_time);
      if (traj.stopped) ++stopped_runs;
    }
    CHECK(stopped_runs > 0);  // the property must be exercised on both paths
  }
  SUBCASE("empty trajectory is rejected") {
    CHECK_THROWS_AS(stopping_time(SdeTrajectory{}), std::invalid_argument);
  }
}

TEST_CASE("psd projection keeps recorded states on the cone") {
  CoeffParams params;
  params.gamma = 0.9;
  params.tau0 = 1.0;
  params.m = 2;
  SdeConfig base;
  base.kind = CoeffKind::attention;
  base.h = 0.05;
  base.horizon = 1.0;
  base.eig_lower = 1e-12;  // keep integrating through near-singular states
  const TokenCovariance v0 = make_cov(2, {1.0, 0.0, 0.0, 1.0});

  // Find a seed whose unprojected run actually leaves the cone, so the
  // comparison below is not vacuous.
  std::uint64_t witness = 0;
  bool found = false;
  for (std::uint64_t seed = 1; seed <= 60 && !found; ++seed) {
    const SdeTrajectory off = simulate_sde(base, params, v0, seed);
    for (double e : off.min_eigs) {
      if (e < -1e-12) {
        witness = seed;
        found = true;
        break;
      }
    }
  }
  REQUIRE(found);

  SdeConfig proj = base;
  proj.psd_projection = true;
  const SdeTrajectory on = simulate_sde(proj, params, v0, witness);
  for (double e : on.min_eigs) {
    if (std::isfinite(e)) CHECK(e >= -1e-10);
  }
}

TEST_CASE("sample_output draws network outputs with the terminal covariance") {
  SUBCASE("identity covariance reproduces itself within Monte Carlo error") {
    const TokenCovariance v = make_cov(2, {1.0, 0.0, 0.0, 1.0});
    const int cols = 100000;
    const Matrix x = sample_output(v, cols, 1, 61u);
    REQUIRE(x.rows == 2);
    REQUIRE(x.cols == cols);
    const TokenCovariance c = covariance_of(x, cols);
    // SE of a variance is sqrt(2/N), of a cross moment 1/sqrt(N).
    const double se_diag = std::sqrt(2.0 / cols);
    const double se_off = 1.0 / std::sqrt(static_cast<double>(cols));
    CHECK(std::abs(c(0, 0) - 1.0) <= 4.0 * se_diag);
    CHECK(std::abs(c(1, 1) - 1.0) <= 4.0 * se_diag);
    CHECK(std::abs(c(0, 1)) <= 4.0 * se_off);
  }
  SUBCASE("rank-one covariance gives perfectly correlated outputs") {
    const TokenCovariance v = make_cov(2, {1.0, 1.0, 1.0, 1.0});
    const Matrix x = sample_output(v, 500, 1, 62u);
    const TokenCovariance c = covariance_of(x, 500);
    const double rho = c(0, 1) / std::sqrt(c(0, 0) * c(1, 1));
    CHECK(rho == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("generic covariance round-trips within 4 SE") {
    const TokenCovariance v = make_cov(2, {2.0, -0.6, -0.6, 1.5});
    const int cols = 100000;
    const Matrix x = sample_output(v, cols, 1, 63u);
    const TokenCovariance c = covariance_of(x, cols);
    for (int a = 0; a < 2; ++a) {
      for (int b = a; b < 2; ++b) {
        const double var_prod = v(a, a) * v(b, b) + v(a, b) * v(a, b);
        const double se = std::sqrt(var_prod / cols);
        CHECK(std::abs(c(a, b) - v(a, b)) <= 4.0 * se);
      }
    }
  }
  SUBCASE("argument checks") {
    const TokenCovariance v = make_cov(2, {1.0, 0.0, 0.0, 1.0});
    CHECK_THROWS_AS(sample_output(v, 0, 1, 1u), std::invalid_argument);
    CHECK_THROWS_AS(sample_output(v, 4, 0, 1u), std::invalid_argument);
    const TokenCovariance bad = make_cov(2, {1.0, 2.0, 2.0, 1.0});
    CHECK_THROWS_AS(sample_output(bad, 4, 1, 1u), std::domain_error);
  }
}

TEST_CASE("trajectory states stay symmetric by construction") {
  CoeffParams params;
  params.gamma = 0.7;
  params.tau0 = 1.0;
  params.m = 3;
  SdeConfig config;
  config.kind = CoeffKind::transformer;
  config.h = 0.02;
  config.horizon = 0.3;
  const TokenCovariance v0 =
      make_cov(3, {1.0, 0.25, 0.125, 0.25, 1.5, 0.375, 0.125, 0.375, 0.75});
  const SdeTrajectory traj = simulate_sde(config, params, v0, 71u);
  // The state is stored flattened (upper triangle), so symmetry is exact by
  // construction; unflattening must reproduce a symmetric matrix bitwise.
  for (const auto& state : traj.v) {
    const Matrix full = unflatten(state, 3).matrix();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(full(i, j) == full(j, i));
    }
  }
}

TEST_CASE("residual dynamics obey the gamma^2 time change in distribution") {
  // Running the branch-strength-gamma dynamics to time T matches the
  // strength-one dynamics run to gamma^2 T; compared via the KS statistic of
  // terminal correlations over 8192 paths each.
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  SdeConfig config;
  config.kind = CoeffKind::resnet;
  config.h = 0.01;

  const auto terminal_rho = [&](double gamma, double horizon, std::uint64_t master) {
    CoeffParams params = resnet_params(gamma);
    SdeConfig c = config;
    c.horizon = horizon;
    std::vector<double> rho;
    rho.reserve(8192);
    for (int s = 0; s < 8192; ++s) {
      const std::uint64_t seed = RandomStream::substream(master, static_cast<std::uint64_t>(s)).bits();
      const SdeTrajectory traj = simulate_sde(c, params, v0, seed);
      const TokenCovariance v = unflatten(traj.v.back(), 2);
      const double denom = v(0, 0) * v(1, 1);
      if (denom > 0.0) rho.push_back(std::clamp(v(0, 1) / std::sqrt(denom), -1.0, 1.0));
    }
    return rho;
  };

  const double gamma = 1.0 / std::sqrt(2.0);
  const std::vector<double> a = terminal_rho(gamma, 0.5, 50u);
  const std::vector<double> b = terminal_rho(1.0, gamma * gamma * 0.5, 51u);
  CHECK(ks_statistic(a, b) < 0.05);
}

TEST_CASE("SdeConfig::validate rejects inconsistent parameters") {
  SdeConfig config;
  CHECK_NOTHROW(config.validate());
  SdeConfig bad = config;
  bad.h = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = config;
  bad.h = 1.0;
  bad.horizon = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = config;
  bad.psd_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = config;
  bad.eig_lower = 2.0;
  bad.eig_upper = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  const TokenCovariance indefinite = make_cov(2, {1.0, 2.0, 2.0, 1.0});
  CHECK_THROWS_AS(simulate_sde(config, resnet_params(0.5), indefinite, 1u),
                  std::invalid_argument);
}
