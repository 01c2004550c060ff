#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "covsde_tools/drivers.hpp"
#include "driver_util.hpp"

namespace covsde_tools {

using covsde::NetConfig;
using covsde::NetVariant;
using detail::put;

Fig2Setup resolve_fig2(const RunOptions& options) {
  Fig2Setup s;
  const int n = options.n.value_or(300);
  const int d = options.d.value_or(100);
  const int m = options.m.value_or(2);
  const int n_k = options.n_k.value_or(64);
  const double tau0 = options.tau0.value_or(1.0);
  const double cplus = options.cplus.value_or(0.0);
  const double cminus = options.cminus.value_or(-1.0);
  const double rho0 = options.rho0.value_or(0.2);
  const double scale = options.v0_scale.value_or(1.0);
  const double h = options.step.value_or(0.01);
  const double horizon = options.horizon.value_or(static_cast<double>(d) / n);
  s.samples = options.samples.value_or(8192);
  s.master_seed = options.seed.value_or(1);
  s.out_dir = options.out_dir.value_or("fig2_out");
  s.format = options.format;

  if (options.gamma) {
    s.gammas = {*options.gamma};
  } else {
    s.gammas = {1.0 / std::sqrt(static_cast<double>(d)), 0.25, 0.5, 0.75, 1.0};
  }

  s.net_base.n = n;
  s.net_base.d = d;
  s.net_base.m = m;
  s.net_base.n_k = n_k;
  s.net_base.tau0 = tau0;
  s.net_base.cplus = cplus;
  s.net_base.cminus = cminus;
  s.net_base.variant = NetVariant::resnet_relu;
  s.net_base.enforce_branch_norm = true;

  s.sde_base.h = h;
  s.sde_base.horizon = horizon;
  s.sde_base.kind = covsde::CoeffKind::resnet;

  s.coeff_base.tau0 = tau0;
  s.coeff_base.cplus = cplus;
  s.coeff_base.cminus = cminus;
  s.coeff_base.m = m;

  s.v0 = equicorrelated_v0(m, rho0, scale);

  put(s.config, "subcommand", "fig2");
  put(s.config, "n", n);
  put(s.config, "d", d);
  put(s.config, "m", m);
  put(s.config, "n_k", n_k);
  std::string gammas_text;
  for (std::size_t i = 0; i < s.gammas.size(); ++i) {
    if (i > 0) gammas_text += " ";
    gammas_text += fmt_double(s.gammas[i]);
  }
  put(s.config, "gammas", gammas_text);
  put(s.config, "tau0", tau0);
  put(s.config, "cplus", cplus);
  put(s.config, "cminus", cminus);
  put(s.config, "rho0", rho0);
  put(s.config, "v0_scale", scale);
  put(s.config, "sde_step", h);
  put(s.config, "sde_horizon", horizon);
  put(s.config, "samples", s.samples);
  put(s.config, "seed", s.master_seed);
  put(s.config, "format", s.format);
  return s;
}

int run_fig2(const RunOptions& options, Fig2Result* result) {
  const detail::Timer timer;
  const Fig2Setup s = resolve_fig2(options);

  Table kde_table;
  kde_table.header = {"gamma", "system", "grid", "density"};
  Table p95_table;
  p95_table.header = {"gamma", "p95_net", "p95_sde", "ks", "dropped_net", "dropped_sde"};

  Fig2Result local;
  for (std::size_t i = 0; i < s.gammas.size(); ++i) {
    const double gamma = s.gammas[i];
    NetConfig net = s.net_base;
    net.gamma = gamma;
    net.lambda = std::sqrt(std::max(0.0, 1.0 - gamma * gamma));
    covsde::CoeffParams params = s.coeff_base;
    params.gamma = gamma;

    covsde::Ensemble net_ens = run_net_ensemble(
        net, s.v0, s.samples, derive_seed(s.master_seed, 10 + i), /*keep_trajectories=*/false);
    covsde::Ensemble sde_ens =
        run_sde_ensemble(s.sde_base, params, s.v0, s.samples, derive_seed(s.master_seed, 20 + i),
                         /*keep_trajectories=*/false);

    long long dropped_net = 0;
    long long dropped_sde = 0;
    const std::vector<double> rho_net = covsde::correlation_samples(net_ens, 0, 1, &dropped_net);
    const std::vector<double> rho_sde = covsde::correlation_samples(sde_ens, 0, 1, &dropped_sde);

    const covsde::KdeResult kde_net = covsde::kde(rho_net);
    const covsde::KdeResult kde_sde = covsde::kde(rho_sde);
    for (std::size_t g = 0; g < kde_net.grid.size(); ++g) {
      kde_table.add_row({gamma, std::string("net"), kde_net.grid[g], kde_net.density[g]});
    }
    for (std::size_t g = 0; g < kde_sde.grid.size(); ++g) {
      kde_table.add_row({gamma, std::string("sde"), kde_sde.grid[g], kde_sde.density[g]});
    }

    std::vector<double> abs_net(rho_net.size());
    std::vector<double> abs_sde(rho_sde.size());
    for (std::size_t k = 0; k < rho_net.size(); ++k) abs_net[k] = std::abs(rho_net[k]);
    for (std::size_t k = 0; k < rho_sde.size(); ++k) abs_sde[k] = std::abs(rho_sde[k]);
    const double p95_net = covsde::percentile(abs_net, 95.0);
    const double p95_sde = covsde::percentile(abs_sde, 95.0);
    const double ks = covsde::ks_statistic(rho_net, rho_sde);
    p95_table.add_row({gamma, p95_net, p95_sde, ks, dropped_net, dropped_sde});

    local.gammas.push_back(gamma);
    local.p95_net.push_back(p95_net);
    local.p95_sde.push_back(p95_sde);
    local.ks.push_back(ks);
    std::printf("fig2: gamma=%.4f p95|rho| net=%.4f sde=%.4f KS=%.4f\n", gamma, p95_net, p95_sde,
                ks);
  }

  write_table(s.out_dir, "kde_by_gamma", s.format, s.config, kde_table);
  write_table(s.out_dir, "p95_by_gamma", s.format, s.config, p95_table);

  local.seconds = timer.seconds();
  std::printf("fig2: wrote %s  [%.1fs]\n", s.out_dir.string().c_str(), local.seconds);
  if (result) *result = std::move(local);
  return 0;
}

}  // namespace covsde_tools
