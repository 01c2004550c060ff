// Micro-benchmarks for the numerical kernels on the hot path of an ensemble
// run: normal generation, the PSD square root, coefficient evaluation, the
// projected attention update, and one Euler-Maruyama step.

#include <benchmark/benchmark.h>

#include <vector>

#include "covsde/coeffs.hpp"
#include "covsde/finitenet.hpp"
#include "covsde/matrix.hpp"
#include "covsde/rng.hpp"
#include "covsde/sdesim.hpp"
#include "covsde/symmat.hpp"

namespace {

covsde::TokenCovariance make_state(int m) {
  covsde::TokenCovariance v(m);
  for (int a = 0; a < m; ++a) {
    for (int b = a; b < m; ++b) {
      v.set(a, b, a == b ? 1.0 + 0.25 * a : 0.2 / (1.0 + a + b));
    }
  }
  return v;
}

void BM_NormalDraws(benchmark::State& state) {
  covsde::RandomStream stream(1);
  for (auto _ : state) {
    double acc = 0.0;
    for (int i = 0; i < 1024; ++i) acc += stream.normal();
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_NormalDraws);

void BM_PsdSqrt(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  covsde::RandomStream stream(2);
  const covsde::Matrix g = stream.normal_matrix(dim, dim);
  covsde::Matrix a = covsde::matmul_nt(g, g);
  for (double& x : a.data) x /= dim;
  for (auto _ : state) {
    benchmark::DoNotOptimize(covsde::psd_sqrt(a, 1e-8));
  }
}
BENCHMARK(BM_PsdSqrt)->Arg(3)->Arg(8)->Arg(36);

void BM_TransformerCoeffs(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const covsde::TokenCovariance v = make_state(m);
  covsde::CoeffParams params;
  params.gamma = 0.5;
  params.cminus = -1.0;
  params.m = m;
  for (auto _ : state) {
    benchmark::DoNotOptimize(covsde::transformer_coeffs(v, params));
  }
}
BENCHMARK(BM_TransformerCoeffs)->Arg(2)->Arg(3);

void BM_ProjectedAttentionLayer(benchmark::State& state) {
  covsde::NetConfig config;
  config.n = 300;
  config.d = 1;
  config.m = 2;
  config.n_k = 64;
  config.cminus = -1.0;
  config.variant = covsde::NetVariant::shaped_attention;
  const covsde::Matrix x = covsde::build_inputs(make_state(config.m), config.m, config.n, 4);
  covsde::RandomStream stream(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(covsde::projected_layer(x, config, stream));
  }
}
BENCHMARK(BM_ProjectedAttentionLayer);

void BM_EmStep(benchmark::State& state) {
  const int m = 3;
  const covsde::TokenCovariance v = make_state(m);
  covsde::CoeffParams params;
  params.gamma = 0.5;
  params.cminus = -1.0;
  params.m = m;
  const covsde::DriftDiffusion coeffs =
      covsde::sde_coeffs(covsde::CoeffKind::transformer, v, params);
  covsde::RandomStream stream(5);
  std::vector<double> noise(static_cast<std::size_t>(m * (m + 1) / 2));
  for (auto _ : state) {
    for (double& z : noise) z = stream.normal();
    benchmark::DoNotOptimize(covsde::em_step(v, coeffs, 0.01, noise, 1e-8));
  }
}
BENCHMARK(BM_EmStep);

}  // namespace

BENCHMARK_MAIN();
