#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "covsde/coeffs.hpp"
#include "covsde/finitenet.hpp"
#include "covsde/sdesim.hpp"
#include "covsde/stats.hpp"
#include "covsde_tools/writers.hpp"

namespace covsde_tools {

// Parsed command-line state. Unset fields fall back to each subcommand's
// frozen defaults, so the experiment protocols run with no flags at all.
struct RunOptions {
  std::optional<int> n;
  std::optional<int> d;
  std::optional<int> m;
  std::optional<int> n_k;
  std::optional<double> gamma;
  std::optional<double> tau0;
  std::optional<double> cplus;
  std::optional<double> cminus;
  std::optional<double> rho0;
  std::optional<double> v0_scale;
  std::optional<double> step;
  std::optional<double> horizon;
  std::optional<long long> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string format = "csv";
  std::string kind = "attention";            // sde subcommand: coefficient family
  std::string variant = "shaped_attention";  // net subcommand: architecture
};

// Stable per-purpose seed derivation: mixes (master, salt) so independent
// ensembles within one run never share streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt);

// scale * ((1 - rho0) I + rho0 11^T): every diagonal entry is `scale`, every
// off-diagonal correlation is rho0. The m=2 case is scale*[[1,rho0],[rho0,1]].
covsde::TokenCovariance equicorrelated_v0(int m, double rho0, double scale);

// Ensemble runners. Sample i uses the substream derived from
// (master_seed, i), and results land in per-index slots, so any worker count
// produces byte-identical ensembles. stop_times (when non-null) receives each
// sample's first threshold-crossing time (the horizon / final depth time if
// it never crossed).
covsde::Ensemble run_net_ensemble(const covsde::NetConfig& config,
                                  const covsde::TokenCovariance& v0, long long samples,
                                  std::uint64_t master_seed, bool keep_trajectories,
                                  std::vector<double>* stop_times = nullptr);
covsde::Ensemble run_sde_ensemble(const covsde::SdeConfig& config,
                                  const covsde::CoeffParams& params,
                                  const covsde::TokenCovariance& v0, long long samples,
                                  std::uint64_t master_seed, bool keep_trajectories,
                                  std::vector<double>* stop_times = nullptr);

// ---------------------------------------------------------------------------
// Rank-collapse comparison (three architectures + limiting SDE).
// Defaults: n=200, d=150, m=2, n_k=64, gamma=1/sqrt(8), lambda=sqrt(1-g^2),
// tau0=1, rho0=0.2, h=0.01, 4096 samples. Pre-LN runs at lambda=gamma=1.
// Files: mean_corr_by_layer, terminal_corr_samples, sde_terminal_corr_samples
// (csv or json) and ks.json.
struct Fig1Setup {
  covsde::NetConfig shaped;
  covsde::NetConfig vanilla;
  covsde::NetConfig pre_ln;
  covsde::SdeConfig sde;
  covsde::CoeffParams coeffs;
  covsde::TokenCovariance v0;
  long long samples = 0;
  std::uint64_t master_seed = 0;
  std::filesystem::path out_dir;
  std::string format;
  ConfigList config;
};
Fig1Setup resolve_fig1(const RunOptions& options);

struct Fig1Result {
  double vanilla_mean_rho = 0.0;      // signed mean terminal correlation
  double shaped_mean_abs_rho = 0.0;   // mean |terminal correlation|
  double pre_ln_mean_rho = 0.0;
  double ks_shaped_sde = 0.0;         // KS(shaped net terminal rho, SDE terminal rho)
  double seconds = 0.0;
};
int run_fig1(const RunOptions& options, Fig1Result* result = nullptr);

// ---------------------------------------------------------------------------
// Correlation spread of the residual MLP vs its limiting SDE across branch
// strengths. Defaults: n=300, d=100, m=2, c=(0,-1), rho0=0.2, h=0.01,
// 8192 samples, gamma grid {1/sqrt(d), 0.25, 0.5, 0.75, 1.0} (a --gamma flag
// collapses the grid to that single value).
// Files: kde_by_gamma, p95_by_gamma.
struct Fig2Setup {
  covsde::NetConfig net_base;    // resnet; lambda/gamma filled per grid point
  covsde::SdeConfig sde_base;
  covsde::CoeffParams coeff_base;
  std::vector<double> gammas;
  covsde::TokenCovariance v0;
  long long samples = 0;
  std::uint64_t master_seed = 0;
  std::filesystem::path out_dir;
  std::string format;
  ConfigList config;
};
Fig2Setup resolve_fig2(const RunOptions& options);

struct Fig2Result {
  std::vector<double> gammas;
  std::vector<double> p95_net;  // 95th percentile of |terminal rho|, finite net
  std::vector<double> p95_sde;
  std::vector<double> ks;       // per-gamma KS(net, SDE) on signed terminal rho
  double seconds = 0.0;
};
int run_fig2(const RunOptions& options, Fig2Result* result = nullptr);

// ---------------------------------------------------------------------------
// Ablations over the three attention modifications (identity skip, softmax
// centering, widened temperature). Defaults: n=300, d=150, m=2, n_k=64,
// gamma=lambda=1/sqrt(2), rho0=0.2, 8192 samples. Eight on/off combinations,
// each a full trajectory ensemble. File: ablation_trajectories.
struct AblationCombo {
  std::string slug;
  covsde::AttentionToggles toggles;
};
struct Fig3Setup {
  covsde::NetConfig base;  // shaped_attention; toggles filled per combo
  std::array<AblationCombo, 8> combos;
  covsde::TokenCovariance v0;
  long long samples = 0;
  std::uint64_t master_seed = 0;
  std::filesystem::path out_dir;
  std::string format;
  ConfigList config;
};
Fig3Setup resolve_fig3(const RunOptions& options);

struct Fig3Result {
  std::vector<std::string> combos;
  std::vector<double> final_mean_rho;
  std::vector<double> final_mean_abs_rho;
  std::vector<double> final_mean_abs_cov;
  double initial_mean_abs_cov = 0.0;
  double seconds = 0.0;
};
int run_fig3(const RunOptions& options, Fig3Result* result = nullptr);

// ---------------------------------------------------------------------------
// Stopping times under an adversarially scaled start (eigenvalues ~100).
// Defaults: n=d=200, m=2, n_k=64, tau0=1, rho0=0.2, v0_scale=100,
// thresholds 1e4 / 1e-4, horizon 1, h=0.005, 100 samples,
// gamma grid {0.01, 0.1, 0.3, 0.5}. File: stopping_times.
struct Fig4Setup {
  covsde::NetConfig net_base;  // shaped attention + stop rule; gamma per grid point
  covsde::SdeConfig sde_base;
  covsde::CoeffParams coeff_base;
  std::vector<double> gammas;
  covsde::TokenCovariance v0;
  long long samples = 0;
  std::uint64_t master_seed = 0;
  std::filesystem::path out_dir;
  std::string format;
  ConfigList config;
};
Fig4Setup resolve_fig4(const RunOptions& options);

struct Fig4Result {
  std::vector<double> gammas;
  std::vector<double> net_median;
  std::vector<double> net_p10;
  std::vector<double> sde_median;
  std::vector<double> sde_p10;
  double seconds = 0.0;
};
int run_fig4(const RunOptions& options, Fig4Result* result = nullptr);

// ---------------------------------------------------------------------------
// Monte Carlo certification of every closed-form coefficient against
// estimator oracles at n=400 (k1 at n=10^4, where the finite-width remainder
// is inside the band). Prints one line per comparison, writes oracle_report,
// and exits nonzero if any |z| exceeds 4. --samples scales every sample
// count proportionally (default baseline 100000).
struct OracleResult {
  int comparisons = 0;
  int violations = 0;
  double worst_abs_z = 0.0;
  std::string worst_name;
  double seconds = 0.0;
};
int run_oracle(const RunOptions& options, OracleResult* result = nullptr);

// ---------------------------------------------------------------------------
// Generic single-configuration runs: one SDE ensemble / one finite-net
// ensemble, terminal states to terminal_states.{csv|json}.
int run_generic_sde(const RunOptions& options);
int run_generic_net(const RunOptions& options);

}  // namespace covsde_tools
