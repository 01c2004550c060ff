#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "covsde_tools/drivers.hpp"
#include "driver_util.hpp"

namespace covsde_tools {

using covsde::AttentionToggles;
using covsde::NetVariant;
using detail::put;

Fig3Setup resolve_fig3(const RunOptions& options) {
  Fig3Setup s;
  const int n = options.n.value_or(300);
  const int d = options.d.value_or(150);
  const int m = options.m.value_or(2);
  const int n_k = options.n_k.value_or(64);
  const double gamma = options.gamma.value_or(1.0 / std::sqrt(2.0));
  const double lambda = std::sqrt(std::max(0.0, 1.0 - gamma * gamma));
  const double tau0 = options.tau0.value_or(1.0);
  const double rho0 = options.rho0.value_or(0.2);
  const double scale = options.v0_scale.value_or(1.0);
  s.samples = options.samples.value_or(8192);
  s.master_seed = options.seed.value_or(1);
  s.out_dir = options.out_dir.value_or("fig3_out");
  s.format = options.format;

  s.base.n = n;
  s.base.d = d;
  s.base.m = m;
  s.base.n_k = n_k;
  s.base.lambda = lambda;
  s.base.gamma = gamma;
  s.base.tau0 = tau0;
  s.base.cplus = options.cplus.value_or(0.0);
  s.base.cminus = options.cminus.value_or(-1.0);
  s.base.gamma1 = 1.0;
  s.base.gamma2 = 1.0;
  s.base.variant = NetVariant::shaped_attention;
  s.base.enforce_branch_norm = true;

  // (identity, centering, wide temperature) on/off, all eight combinations.
  s.combos = {{{"full_shaped", AttentionToggles{true, true, true}},
               {"no_identity", AttentionToggles{false, true, true}},
               {"no_centering", AttentionToggles{true, false, true}},
               {"narrow_tau", AttentionToggles{true, true, false}},
               {"only_identity", AttentionToggles{true, false, false}},
               {"only_centering", AttentionToggles{false, true, false}},
               {"only_wide_tau", AttentionToggles{false, false, true}},
               {"vanilla", AttentionToggles{false, false, false}}}};

  s.v0 = equicorrelated_v0(m, rho0, scale);

  put(s.config, "subcommand", "fig3");
  put(s.config, "n", n);
  put(s.config, "d", d);
  put(s.config, "m", m);
  put(s.config, "n_k", n_k);
  put(s.config, "gamma", gamma);
  put(s.config, "lambda", lambda);
  put(s.config, "tau0", tau0);
  put(s.config, "rho0", rho0);
  put(s.config, "v0_scale", scale);
  put(s.config, "samples", s.samples);
  put(s.config, "seed", s.master_seed);
  put(s.config, "format", s.format);
  return s;
}

int run_fig3(const RunOptions& options, Fig3Result* result) {
  const detail::Timer timer;
  const Fig3Setup s = resolve_fig3(options);

  Table table;
  table.header = {"combo", "layer", "mean_rho", "mean_abs_rho", "mean_abs_cov", "skipped"};

  Fig3Result local;
  for (std::size_t c = 0; c < s.combos.size(); ++c) {
    const AblationCombo& combo = s.combos[c];
    covsde::NetConfig config = s.base;
    config.toggles = combo.toggles;
    // One combo's trajectories at a time caps peak memory; the means are all
    // that outlive the iteration.
    covsde::CorrelationTrajectory trajectory;
    {
      covsde::Ensemble ensemble = run_net_ensemble(
          config, s.v0, s.samples, derive_seed(s.master_seed, 30 + c), /*keep_trajectories=*/true);
      trajectory = covsde::mean_correlation_trajectory(ensemble);
    }
    for (std::size_t layer = 0; layer < trajectory.mean_rho.size(); ++layer) {
      table.add_row({combo.slug, static_cast<long long>(layer), trajectory.mean_rho[layer],
                     trajectory.mean_abs_rho[layer], trajectory.mean_abs_cov[layer],
                     trajectory.skipped});
    }
    local.combos.push_back(combo.slug);
    local.final_mean_rho.push_back(trajectory.mean_rho.back());
    local.final_mean_abs_rho.push_back(trajectory.mean_abs_rho.back());
    local.final_mean_abs_cov.push_back(trajectory.mean_abs_cov.back());
    if (c == 0) local.initial_mean_abs_cov = trajectory.mean_abs_cov.front();
    std::printf("fig3: %-14s mean|rho|=%.4f mean rho=%+.4f mean|V|=%.3e (skipped %lld)\n",
                combo.slug.c_str(), trajectory.mean_abs_rho.back(), trajectory.mean_rho.back(),
                trajectory.mean_abs_cov.back(), trajectory.skipped);
  }

  write_table(s.out_dir, "ablation_trajectories", s.format, s.config, table);

  local.seconds = timer.seconds();
  std::printf("fig3: wrote %s  [%.1fs]\n", s.out_dir.string().c_str(), local.seconds);
  if (result) *result = std::move(local);
  return 0;
}

}  // namespace covsde_tools
