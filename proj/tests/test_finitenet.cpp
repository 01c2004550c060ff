#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "covsde/coeffs.hpp"
#include "covsde/finitenet.hpp"
#include "covsde/matrix.hpp"
#include "covsde/mcoracle.hpp"
#include "covsde/parallel.hpp"
#include "covsde/rng.hpp"
#include "covsde/symmat.hpp"
#include "doctest.h"

using namespace covsde;

namespace {

TokenCovariance make_cov(int m, const std::vector<double>& entries) {
  Matrix a(m, m);
  a.data = entries;
  return TokenCovariance::from_matrix(a);
}

NetConfig base_config() {
  NetConfig cfg;
  cfg.n = 64;
  cfg.d = 1;
  cfg.m = 2;
  cfg.n_k = 16;
  return cfg;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows == b.rows);
  REQUIRE(a.cols == b.cols);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("shaped_relu with zero slope adjustments is the identity") {
  for (double x : {-3.0, -1.0, -0.25, 0.0, 0.5, 2.0, 10.0}) {
    for (int n : {1, 7, 100, 10000}) {
      CHECK(shaped_relu(x, 0.0, 0.0, n) == x);
    }
  }
}

TEST_CASE("shaped_relu scales the negative branch by 1 + cminus/sqrt(n)") {
  // x = -1, cminus = -1, n = 100: slope 1 - 0.1 = 0.9.
  CHECK(shaped_relu(-1.0, 0.0, -1.0, 100) == doctest::Approx(-0.9).epsilon(1e-15));
  // Positive inputs ignore cminus entirely: x = 2 with cplus = 0 is 2 at any n.
  for (int n : {1, 4, 100, 1000000}) {
    CHECK(shaped_relu(2.0, 0.0, -5.0, n) == 2.0);
  }
  CHECK(shaped_relu(0.0, 3.0, -2.0, 25) == 0.0);
  CHECK_THROWS_AS(shaped_relu(1.0, 0.0, 0.0, 0), std::invalid_argument);
}

TEST_CASE("he_constant normalizes the two slopes") {
  CHECK(he_constant(0.0, 0.0, 50) == 1.0);
  // n = 100: slopes 1 and 0.9, c = 2/(1 + 0.81) = 1/0.905.
  CHECK(he_constant(0.0, -1.0, 100) == doctest::Approx(1.0 / 0.905).epsilon(1e-15));
  CHECK_THROWS_AS(he_constant(0.0, 0.0, 0), std::invalid_argument);
}

TEST_CASE("he_constant makes E[shaped_relu(g)^2] equal 1/c for standard normal g") {
  const int n = 100;
  const double cplus = 0.0;
  const double cminus = -1.0;
  const double target = 1.0 / he_constant(cplus, cminus, n);  // 0.905
  RandomStream rs(20260816u);
  const long long draws = 1000000;
  KahanSum sum;
  KahanSum sumsq;
  for (long long i = 0; i < draws; ++i) {
    const double s = shaped_relu(rs.normal(), cplus, cminus, n);
    sum.add(s * s);
    sumsq.add(s * s * s * s);
  }
  const double mean = sum.value() / static_cast<double>(draws);
  const double var =
      (sumsq.value() - static_cast<double>(draws) * mean * mean) / static_cast<double>(draws - 1);
  const double se = std::sqrt(var / static_cast<double>(draws));
  CHECK(std::abs(mean - target) <= 4.0 * se);
}

TEST_CASE("attention_logits of zero inputs is zero and shapes are checked") {
  Matrix x(3, 8);
  RandomStream rs(7u);
  Matrix wq = rs.normal_matrix(8, 4);
  Matrix wk = rs.normal_matrix(8, 4);
  const Matrix y = attention_logits(x, wq, wk, 8);
  for (double v : y.data) CHECK(v == 0.0);
  CHECK(y.rows == 3);
  CHECK(y.cols == 3);

  Matrix wrong = rs.normal_matrix(7, 4);
  CHECK_THROWS_AS(attention_logits(x, wrong, wk, 8), std::invalid_argument);
  CHECK_THROWS_AS(attention_logits(x, wq, wrong, 8), std::invalid_argument);
  Matrix wk5 = rs.normal_matrix(8, 5);
  CHECK_THROWS_AS(attention_logits(x, wq, wk5, 8), std::invalid_argument);
  CHECK_THROWS_AS(attention_logits(x, wq, wk, 9), std::invalid_argument);
}

TEST_CASE("attention logit second moments match n_k V^{ad} V^{bw} over weight draws") {
  // Fresh Wq, Wk per draw at fixed inputs; the empirical input covariance is
  // the exact target, so the only error is Monte Carlo noise.
  const int m = 3;
  const int n = 64;
  const int n_k = 16;
  const TokenCovariance v0 =
      make_cov(m, {1.0, 0.25, 0.125, 0.25, 1.5, 0.375, 0.125, 0.375, 0.75});
  const Matrix x = build_inputs(v0, m, n, 991u);
  const TokenCovariance v = covariance_of(x, n);

  const std::vector<std::array<int, 4>> tuples = {
      {0, 0, 0, 0}, {0, 1, 0, 1}, {0, 1, 1, 0}, {1, 2, 2, 1}, {0, 2, 1, 2}, {2, 2, 0, 0}};
  const std::vector<std::array<int, 2>> mean_tuples = {{0, 1}, {2, 0}};

  const long long draws = 100000;
  RandomStream rs(992u);
  std::vector<KahanSum> sum(tuples.size() + mean_tuples.size());
  std::vector<KahanSum> sumsq(tuples.size() + mean_tuples.size());
  for (long long i = 0; i < draws; ++i) {
    const Matrix wq = rs.normal_matrix(n, n_k);
    const Matrix wk = rs.normal_matrix(n, n_k);
    const Matrix y = attention_logits(x, wq, wk, n);
    for (std::size_t t = 0; t < tuples.size(); ++t) {
      const double val = y(tuples[t][0], tuples[t][1]) * y(tuples[t][2], tuples[t][3]);
      sum[t].add(val);
      sumsq[t].add(val * val);
    }
    for (std::size_t t = 0; t < mean_tuples.size(); ++t) {
      const double val = y(mean_tuples[t][0], mean_tuples[t][1]);
      sum[tuples.size() + t].add(val);
      sumsq[tuples.size() + t].add(val * val);
    }
  }
  const auto finalize = [&](std::size_t k, double& mean, double& se) {
    mean = sum[k].value() / static_cast<double>(draws);
    const double var = (sumsq[k].value() - static_cast<double>(draws) * mean * mean) /
                       static_cast<double>(draws - 1);
    se = std::sqrt(std::max(var, 0.0) / static_cast<double>(draws));
  };
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    const double target =
        n_k * v(tuples[t][0], tuples[t][2]) * v(tuples[t][1], tuples[t][3]);
    double mean = 0.0;
    double se = 0.0;
    finalize(t, mean, se);
    CAPTURE(t);
    CHECK(std::abs(mean - target) <= 4.0 * se);
  }
  for (std::size_t t = 0; t < mean_tuples.size(); ++t) {
    double mean = 0.0;
    double se = 0.0;
    finalize(tuples.size() + t, mean, se);
    CHECK(std::abs(mean) <= 4.0 * se);
  }
}

TEST_CASE("shaped attention of zero logits is exactly the identity") {
  for (int m : {1, 2, 3, 5}) {
    for (double tau0 : {0.5, 1.0, 2.0}) {
      Matrix y(m, m);
      const Matrix a = shaped_attention_matrix(y, tau0, 300, 64, 1.0, 1.0, AttentionToggles{});
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          CHECK(a(i, j) == (i == j ? 1.0 : 0.0));
        }
      }
    }
  }
}

TEST_CASE("attention matrix row sums: vanilla 1, shaped gamma1 + 1 - gamma2") {
  RandomStream rs(31u);
  const int m = 4;
  Matrix y(m, m);
  for (double& v : y.data) v = 3.0 * rs.normal();

  const AttentionToggles vanilla{false, false, false};
  const Matrix av = shaped_attention_matrix(y, 1.0, 300, 64, 0.0, 0.0, vanilla);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += av(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  const Matrix as = shaped_attention_matrix(y, 1.0, 300, 64, 0.7, 0.3, AttentionToggles{});
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += as(i, j);
    CHECK(s == doctest::Approx(0.7 + 1.0 - 0.3).epsilon(1e-12));
  }
}

TEST_CASE("vanilla toggle set reduces to a plain softmax at temperature sqrt(n_k)") {
  RandomStream rs(32u);
  const int m = 3;
  const int n_k = 16;
  Matrix y(m, m);
  for (double& v : y.data) v = 2.0 * rs.normal();
  const AttentionToggles vanilla{false, false, false};
  const Matrix a = shaped_attention_matrix(y, 5.0, 300, n_k, 0.0, 0.0, vanilla);
  Matrix scaled(m, m);
  const double tau = std::sqrt(static_cast<double>(n_k));
  for (std::size_t k = 0; k < y.data.size(); ++k) scaled.data[k] = y.data[k] / tau;
  const Matrix ref = softmax_rows(scaled);
  CHECK(max_abs_diff(a, ref) == 0.0);
}

TEST_CASE("saturated logits give a one-hot softmax row inside the shaped matrix") {
  const int m = 3;
  const int n_k = 16;  // narrow temperature sqrt(16) = 4
  Matrix y(m, m);
  // Row i points hard at column (i+1) mod m; gaps of 200/4 = 50 saturate exp.
  for (int i = 0; i < m; ++i) y(i, (i + 1) % m) = 200.0;
  const AttentionToggles narrow{true, true, false};
  const double g1 = 0.6;
  const double g2 = 0.4;
  const Matrix a = shaped_attention_matrix(y, 1.0, 300, n_k, g1, g2, narrow);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double expect = (i == j ? g1 : 0.0) + (j == (i + 1) % m ? 1.0 : 0.0) - g2 / m;
      CHECK(a(i, j) == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("layer_norm_rows gives zero mean, unit variance per row") {
  RandomStream rs(33u);
  Matrix x(3, 50);
  for (double& v : x.data) v = 2.0 + 3.0 * rs.normal();
  const Matrix z = layer_norm_rows(x);
  for (int i = 0; i < 3; ++i) {
    double mean = 0.0;
    double var = 0.0;
    for (int j = 0; j < 50; ++j) mean += z(i, j);
    mean /= 50.0;
    for (int j = 0; j < 50; ++j) var += z(i, j) * z(i, j);
    var /= 50.0;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sample_layer_weights is seed-deterministic with documented shapes") {
  RandomStream a(5u);
  RandomStream b(5u);
  const LayerWeights wa = sample_layer_weights(a, 12, 4);
  const LayerWeights wb = sample_layer_weights(b, 12, 4);
  CHECK(wa.wq.rows == 12);
  CHECK(wa.wq.cols == 4);
  CHECK(wa.wk.rows == 12);
  CHECK(wa.wv.rows == 12);
  CHECK(wa.wv.cols == 12);
  CHECK(wa.wpre.cols == 12);
  CHECK(wa.wpost.rows == 12);
  CHECK(wa.wq.data == wb.wq.data);
  CHECK(wa.wpost.data == wb.wpost.data);
}

TEST_CASE("attention_layer and resnet_layer at gamma=0 are lambda * X exactly") {
  NetConfig cfg = base_config();
  cfg.gamma = 0.0;
  cfg.lambda = 0.75;
  RandomStream rs(41u);
  const Matrix x = rs.normal_matrix(cfg.m, cfg.n);
  const LayerWeights w = sample_layer_weights(rs, cfg.n, cfg.n_k);

  const Matrix xa = attention_layer(x, w, cfg);
  const Matrix xr = resnet_layer(x, w, cfg);
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    CHECK(xa.data[k] == 0.75 * x.data[k]);
    CHECK(xr.data[k] == 0.75 * x.data[k]);
  }

  cfg.lambda = 1.0;
  const Matrix xi = attention_layer(x, w, cfg);
  CHECK(xi.data == x.data);

  // The residual block applies both scalings, so gamma=0 gives lambda^2 * X.
  cfg.lambda = 0.5;
  const Matrix xt = transformer_block(x, w, cfg);
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    CHECK(xt.data[k] == doctest::Approx(0.25 * x.data[k]).epsilon(1e-15).scale(1.0));
  }

  LayerWeights bad = sample_layer_weights(rs, cfg.n, cfg.n_k);
  bad.wpre = rs.normal_matrix(cfg.n + 1, cfg.n);
  CHECK_THROWS_AS(resnet_layer(x, bad, cfg), std::invalid_argument);
}

TEST_CASE("build_inputs reproduces the target covariance") {
  SUBCASE("identity covariance gives orthogonal rows of squared norm n") {
    const TokenCovariance v0 = make_cov(2, {1.0, 0.0, 0.0, 1.0});
    const Matrix x = build_inputs(v0, 2, 4, 17u);
    double n00 = 0.0;
    double n11 = 0.0;
    double dot = 0.0;
    for (int j = 0; j < 4; ++j) {
      n00 += x(0, j) * x(0, j);
      n11 += x(1, j) * x(1, j);
      dot += x(0, j) * x(1, j);
    }
    CHECK(n00 == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(n11 == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(dot == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  }
  SUBCASE("correlated covariance round-trips through covariance_of") {
    const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
    const Matrix x = build_inputs(v0, 2, 200, 18u);
    const TokenCovariance v = covariance_of(x, 200);
    CHECK(max_abs_diff(v.matrix(), v0.matrix()) <= 1e-10);
  }
  SUBCASE("scaled covariance keeps its eigenvalues") {
    const TokenCovariance v0 = make_cov(2, {100.0, 20.0, 20.0, 100.0});
    const Matrix x = build_inputs(v0, 2, 150, 19u);
    const EigenDecomposition eig = sym_eigen(covariance_of(x, 150).matrix());
    CHECK(eig.values[0] == doctest::Approx(120.0).epsilon(1e-8));
    CHECK(eig.values[1] == doctest::Approx(80.0).epsilon(1e-8));
  }
  SUBCASE("argument checks") {
    const TokenCovariance v0 = make_cov(3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK_THROWS_AS(build_inputs(v0, 3, 2, 1u), std::invalid_argument);
    CHECK_THROWS_AS(build_inputs(v0, 2, 8, 1u), std::invalid_argument);
    const TokenCovariance bad = make_cov(2, {1.0, 2.0, 2.0, 1.0});
    CHECK_THROWS_AS(build_inputs(bad, 2, 8, 1u), std::domain_error);
  }
}

TEST_CASE("NetConfig::validate rejects inconsistent parameters") {
  NetConfig cfg = base_config();
  CHECK_NOTHROW(cfg.validate());
  NetConfig bad = cfg;
  bad.m = bad.n + 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.tau0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.lambda = 1.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.gamma = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.d = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.cplus = std::nan("");
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.enforce_branch_norm = true;
  bad.lambda = 0.9;
  bad.gamma = 0.9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.gamma = std::sqrt(1.0 - 0.81);
  CHECK_NOTHROW(bad.validate());
  bad = cfg;
  bad.stop.enabled = true;
  bad.stop.eig_lower = 2.0;
  bad.stop.eig_upper = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("forward_network basics: depth zero, determinism, seed sensitivity") {
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  NetConfig cfg = base_config();
  cfg.variant = NetVariant::shaped_transformer;

  SUBCASE("d = 0 records only the input covariance") {
    NetConfig c0 = cfg;
    c0.d = 0;
    const NetTrajectory traj = forward_network(c0, v0, 3u);
    REQUIRE(traj.v.size() == 1);
    const TokenCovariance v = unflatten(traj.v[0], 2);
    CHECK(max_abs_diff(v.matrix(), v0.matrix()) <= 1e-10);
    CHECK(traj.stop_layer == -1);
    CHECK(traj.nonfinite_layer == -1);
  }

  SUBCASE("same seed gives bit-identical trajectories, different seeds differ") {
    NetConfig c = cfg;
    c.d = 6;
    const NetTrajectory a = forward_network(c, v0, 44u);
    const NetTrajectory b = forward_network(c, v0, 44u);
    REQUIRE(a.v.size() == b.v.size());
    for (std::size_t l = 0; l < a.v.size(); ++l) CHECK(a.v[l] == b.v[l]);
    const NetTrajectory other = forward_network(c, v0, 45u);
    CHECK(a.v.back() != other.v.back());
  }

  SUBCASE("config/covariance dimension mismatch throws") {
    NetConfig c = cfg;
    c.m = 3;
    CHECK_THROWS_AS(forward_network(c, v0, 1u), std::invalid_argument);
  }
}

TEST_CASE("forward_network stop rule freezes the trajectory at the crossing layer") {
  const TokenCovariance v0 = make_cov(2, {1.0, 0.0, 0.0, 1.0});
  NetConfig cfg = base_config();
  cfg.variant = NetVariant::shaped_transformer;
  cfg.d = 10;
  cfg.stop.enabled = true;
  cfg.stop.eig_lower = 1e-4;
  cfg.stop.eig_upper = 0.5;  // below the input eigenvalues: crossing at layer 1
  const NetTrajectory traj = forward_network(cfg, v0, 9u);
  CHECK(traj.stop_layer == 1);
  CHECK(traj.nonfinite_layer == -1);
  CHECK(traj.stop_time == doctest::Approx(1.0 / cfg.n).epsilon(1e-15));
  REQUIRE(traj.v.size() == 11);
  // Held state: every layer after the stop repeats the crossing state.
  for (std::size_t l = 1; l < traj.v.size(); ++l) CHECK(traj.v[l] == traj.v[1]);
}

TEST_CASE("forward_network reports the layer where activations left the finite range") {
  // Slopes of +-1e200 overflow the branch covariance at the first layer; the
  // trajectory must record the layer index and hold the last finite state
  // instead of crashing.
  const TokenCovariance v0 = make_cov(1, {4.0});
  NetConfig cfg;
  cfg.n = 4;
  cfg.d = 5;
  cfg.m = 1;
  cfg.n_k = 2;
  cfg.variant = NetVariant::resnet_relu;
  cfg.cplus = 1e200;
  cfg.cminus = -1e200;
  const NetTrajectory traj = forward_network(cfg, v0, 6u);
  CHECK(traj.nonfinite_layer == 1);
  CHECK(traj.stop_layer == 1);
  CHECK(traj.stop_time == doctest::Approx(0.25).epsilon(1e-15));
  REQUIRE(traj.v.size() == 6);
  for (const auto& state : traj.v) {
    for (double x : state) CHECK(std::isfinite(x));
  }
  for (std::size_t l = 1; l < traj.v.size(); ++l) CHECK(traj.v[l] == traj.v[0]);
}

TEST_CASE("deep shaped transformer stays finite at desk scale") {
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  NetConfig cfg;
  cfg.n = 150;
  cfg.d = 150;
  cfg.m = 2;
  cfg.n_k = 64;
  cfg.variant = NetVariant::shaped_transformer;
  cfg.cplus = 0.0;
  cfg.cminus = -1.0;
  const NetTrajectory traj = forward_network(cfg, v0, 77u);
  CHECK(traj.nonfinite_layer == -1);
  REQUIRE(traj.v.size() == 151);
  for (const auto& state : traj.v) {
    for (double x : state) CHECK(std::isfinite(x));
  }
}

TEST_CASE("residual branch with matched slopes preserves diagonal covariance on average") {
  // With c = he_constant the branch second moment matches the identity path,
  // so n * E[dV^{aa}] is exactly zero at any width; checked at n = 10^4.
  NetConfig cfg = base_config();
  cfg.lambda = std::sqrt(0.5);
  cfg.gamma = std::sqrt(0.5);
  cfg.cplus = 0.0;
  cfg.cminus = -1.0;
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  const OneStepMoments one =
      one_step_moments(CoeffKind::resnet, v0, 10000, 16, cfg, 4000, 88u);
  const FlatIndexMap map(2);
  for (int a = 0; a < 2; ++a) {
    const MomentEstimate& est = one.drift[static_cast<std::size_t>(map.index(a, a))];
    CHECK(std::abs(est.mean) <= 4.0 * est.std_error);
  }
}

TEST_CASE("explicit-weight and projected layers agree in one-step moments") {
  // The projected step replaces wide weight matrices by covariance factors;
  // both paths must produce the same conditional drift and diffusion.
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  NetConfig cfg = base_config();
  cfg.lambda = std::sqrt(0.5);
  cfg.gamma = std::sqrt(0.5);
  cfg.cplus = 0.0;
  cfg.cminus = -1.0;
  const long long samples = 20000;

  NetConfig explicit_cfg = cfg;
  explicit_cfg.explicit_weights = true;
  const OneStepMoments a =
      one_step_moments(CoeffKind::transformer, v0, 64, 16, explicit_cfg, samples, 90u);
  NetConfig projected_cfg = cfg;
  projected_cfg.explicit_weights = false;
  const OneStepMoments b =
      one_step_moments(CoeffKind::transformer, v0, 64, 16, projected_cfg, samples, 91u);

  REQUIRE(a.drift.size() == b.drift.size());
  for (std::size_t k = 0; k < a.drift.size(); ++k) {
    const double joint =
        std::sqrt(a.drift[k].std_error * a.drift[k].std_error +
                  b.drift[k].std_error * b.drift[k].std_error);
    CAPTURE(k);
    CHECK(std::abs(a.drift[k].mean - b.drift[k].mean) <= 4.0 * joint);
  }
  for (int k = 0; k < a.diffusion.rows; ++k) {
    for (int l = 0; l < a.diffusion.cols; ++l) {
      const double joint = std::sqrt(a.diffusion_se(k, l) * a.diffusion_se(k, l) +
                                     b.diffusion_se(k, l) * b.diffusion_se(k, l));
      CAPTURE(k);
      CAPTURE(l);
      CHECK(std::abs(a.diffusion(k, l) - b.diffusion(k, l)) <= 4.0 * joint);
    }
  }
}

TEST_CASE("small ensembles show the rank-collapse contrast between variants") {
  // Sanity-scale version of the depth-150 experiment: softmax-only networks
  // drive token correlation toward one; the shaped variant keeps it moderate.
  const TokenCovariance v0 = make_cov(2, {1.0, 0.2, 0.2, 1.0});
  NetConfig cfg;
  cfg.n = 200;
  cfg.d = 150;
  cfg.m = 2;
  cfg.n_k = 64;
  const double gamma = 1.0 / std::sqrt(8.0);
  const int runs = 48;

  const auto mean_terminal_rho = [&](NetVariant variant) {
    NetConfig c = cfg;
    c.variant = variant;
    c.lambda = std::sqrt(1.0 - gamma * gamma);
    c.gamma = gamma;
    double acc = 0.0;
    for (int r = 0; r < runs; ++r) {
      const NetTrajectory traj = forward_network(c, v0, 1000u + static_cast<std::uint64_t>(r));
      const TokenCovariance v = unflatten(traj.v.back(), 2);
      acc += v(0, 1) / std::sqrt(v(0, 0) * v(1, 1));
    }
    return acc / runs;
  };

  CHECK(mean_terminal_rho(NetVariant::vanilla_softmax) >= 0.95);
  CHECK(mean_terminal_rho(NetVariant::shaped_attention) <= 0.8);
}
