#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "covsde_tools/drivers.hpp"
#include "driver_util.hpp"

namespace covsde_tools {

using detail::put;

Fig4Setup resolve_fig4(const RunOptions& options) {
  Fig4Setup s;
  const int n = options.n.value_or(200);
  const int d = options.d.value_or(200);
  const int m = options.m.value_or(2);
  const int n_k = options.n_k.value_or(64);
  const double tau0 = options.tau0.value_or(1.0);
  const double rho0 = options.rho0.value_or(0.2);
  const double scale = options.v0_scale.value_or(100.0);  // adversarial start: eigenvalues ~100
  const double h = options.step.value_or(0.005);
  const double horizon = options.horizon.value_or(static_cast<double>(d) / n);
  s.samples = options.samples.value_or(100);
  s.master_seed = options.seed.value_or(1);
  s.out_dir = options.out_dir.value_or("fig4_out");
  s.format = options.format;

  if (options.gamma) {
    s.gammas = {*options.gamma};
  } else {
    s.gammas = {0.01, 0.1, 0.3, 0.5};
  }

  s.net_base.n = n;
  s.net_base.d = d;
  s.net_base.m = m;
  s.net_base.n_k = n_k;
  s.net_base.tau0 = tau0;
  s.net_base.cplus = options.cplus.value_or(0.0);
  s.net_base.cminus = options.cminus.value_or(-1.0);
  s.net_base.gamma1 = 1.0;
  s.net_base.gamma2 = 1.0;
  s.net_base.variant = covsde::NetVariant::shaped_attention;
  s.net_base.enforce_branch_norm = true;
  s.net_base.stop.enabled = true;
  s.net_base.stop.eig_lower = 1e-4;
  s.net_base.stop.eig_upper = 1e4;

  s.sde_base.h = h;
  s.sde_base.horizon = horizon;
  s.sde_base.kind = covsde::CoeffKind::attention;
  s.sde_base.eig_lower = 1e-4;
  s.sde_base.eig_upper = 1e4;

  s.coeff_base.tau0 = tau0;
  s.coeff_base.cplus = s.net_base.cplus;
  s.coeff_base.cminus = s.net_base.cminus;
  s.coeff_base.m = m;

  s.v0 = equicorrelated_v0(m, rho0, scale);

  put(s.config, "subcommand", "fig4");
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
  put(s.config, "rho0", rho0);
  put(s.config, "v0_scale", scale);
  put(s.config, "eig_lower", s.sde_base.eig_lower);
  put(s.config, "eig_upper", s.sde_base.eig_upper);
  put(s.config, "sde_step", h);
  put(s.config, "horizon", horizon);
  put(s.config, "samples", s.samples);
  put(s.config, "seed", s.master_seed);
  put(s.config, "format", s.format);
  return s;
}

int run_fig4(const RunOptions& options, Fig4Result* result) {
  const detail::Timer timer;
  const Fig4Setup s = resolve_fig4(options);

  Table table;
  table.header = {"gamma", "system", "median_tstar", "p10_tstar", "stopped"};

  Fig4Result local;
  for (std::size_t i = 0; i < s.gammas.size(); ++i) {
    const double gamma = s.gammas[i];
    covsde::NetConfig net = s.net_base;
    net.gamma = gamma;
    net.lambda = std::sqrt(std::max(0.0, 1.0 - gamma * gamma));
    covsde::CoeffParams params = s.coeff_base;
    params.gamma = gamma;

    std::vector<double> net_tstar;
    run_net_ensemble(net, s.v0, s.samples, derive_seed(s.master_seed, 40 + i),
                     /*keep_trajectories=*/false, &net_tstar);
    std::vector<double> sde_tstar;
    run_sde_ensemble(s.sde_base, params, s.v0, s.samples, derive_seed(s.master_seed, 50 + i),
                     /*keep_trajectories=*/false, &sde_tstar);

    const double net_median = covsde::percentile(net_tstar, 50.0);
    const double net_p10 = covsde::percentile(net_tstar, 10.0);
    const double sde_median = covsde::percentile(sde_tstar, 50.0);
    const double sde_p10 = covsde::percentile(sde_tstar, 10.0);
    long long net_stopped = 0;
    long long sde_stopped = 0;
    const double net_horizon = static_cast<double>(s.net_base.d) / s.net_base.n;
    for (double t : net_tstar) net_stopped += (t < net_horizon) ? 1 : 0;
    for (double t : sde_tstar) sde_stopped += (t < s.sde_base.horizon) ? 1 : 0;

    table.add_row({gamma, std::string("net"), net_median, net_p10, net_stopped});
    table.add_row({gamma, std::string("sde"), sde_median, sde_p10, sde_stopped});

    local.gammas.push_back(gamma);
    local.net_median.push_back(net_median);
    local.net_p10.push_back(net_p10);
    local.sde_median.push_back(sde_median);
    local.sde_p10.push_back(sde_p10);
    std::printf("fig4: gamma=%.3f net median t*=%.3f p10=%.3f | sde median t*=%.3f p10=%.3f\n",
                gamma, net_median, net_p10, sde_median, sde_p10);
  }

  write_table(s.out_dir, "stopping_times", s.format, s.config, table);

  local.seconds = timer.seconds();
  std::printf("fig4: wrote %s  [%.1fs]\n", s.out_dir.string().c_str(), local.seconds);
  if (result) *result = std::move(local);
  return 0;
}

}  // namespace covsde_tools
