#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "covsde_tools/drivers.hpp"

namespace {

// Option values live here; only flags the user (or the config file) actually
// set are copied into RunOptions, so each subcommand keeps its own defaults.
struct FlagBox {
  int n = 0, d = 0, m = 0, n_k = 0;
  double gamma = 0, tau0 = 0, cplus = 0, cminus = 0, rho0 = 0, v0_scale = 0, step = 0, horizon = 0;
  long long samples = 0;
  std::uint64_t seed = 0;
  std::string out, format = "csv", kind = "attention", variant = "shaped_attention";
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "covsde: finite-width shaped-attention network ensembles and their "
      "limiting covariance SDEs"};
  app.set_config("--config", "", "Flat key=value config file; command-line flags override it");
  app.require_subcommand(1);

  FlagBox box;
  auto* opt_n = app.add_option("--n", box.n, "Network width")->check(CLI::PositiveNumber);
  auto* opt_d = app.add_option("--d", box.d, "Network depth (blocks)")
                    ->check(CLI::NonNegativeNumber);
  auto* opt_m = app.add_option("--m", box.m, "Token count")->check(CLI::PositiveNumber);
  auto* opt_nk = app.add_option("--nk", box.n_k, "Key/query dimension")
                     ->check(CLI::PositiveNumber);
  auto* opt_gamma = app.add_option(
      "--gamma", box.gamma,
      "Residual branch strength (for fig2/fig4 this collapses the gamma grid to one value)");
  auto* opt_tau0 = app.add_option("--tau0", box.tau0, "Softmax temperature constant");
  auto* opt_cplus = app.add_option("--cplus", box.cplus, "Activation slope offset, positive side");
  auto* opt_cminus =
      app.add_option("--cminus", box.cminus, "Activation slope offset, negative side");
  auto* opt_rho0 = app.add_option("--rho0", box.rho0, "Initial token correlation");
  auto* opt_v0s = app.add_option("--v0scale", box.v0_scale, "Initial covariance diagonal scale");
  auto* opt_step = app.add_option("--step", box.step, "Euler-Maruyama step size");
  auto* opt_horizon =
      app.add_option("--horizon", box.horizon, "Integration horizon (default: d/n)");
  auto* opt_samples =
      app.add_option("--samples", box.samples, "Ensemble sample count (oracle: baseline count)")
          ->check(CLI::PositiveNumber);
  auto* opt_seed = app.add_option("--seed", box.seed, "Master seed");
  auto* opt_out = app.add_option("--out", box.out, "Output directory");
  app.add_option("--format", box.format, "Record file format")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--kind", box.kind, "sde: coefficient family")
      ->check(CLI::IsMember({"resnet", "attention", "transformer"}));
  app.add_option("--variant", box.variant, "net: architecture")
      ->check(CLI::IsMember({"shaped_attention", "vanilla_softmax", "pre_ln", "resnet_relu",
                             "shaped_transformer"}));

  CLI::App* fig1 = app.add_subcommand(
      "fig1", "Rank collapse: shaped/vanilla/Pre-LN attention nets vs the attention SDE");
  CLI::App* fig2 = app.add_subcommand(
      "fig2", "Residual MLP correlation spread vs its SDE across branch strengths");
  CLI::App* fig3 =
      app.add_subcommand("fig3", "Ablations over the three attention modifications");
  CLI::App* fig4 =
      app.add_subcommand("fig4", "Stopping times from an adversarially scaled start");
  CLI::App* sde = app.add_subcommand("sde", "One covariance-SDE ensemble, terminal states");
  CLI::App* net = app.add_subcommand("net", "One finite-network ensemble, terminal states");
  CLI::App* oracle =
      app.add_subcommand("oracle", "Monte Carlo certification of all closed-form coefficients");
  for (CLI::App* sub : {fig1, fig2, fig3, fig4, sde, net, oracle}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  covsde_tools::RunOptions options;
  if (opt_n->count()) options.n = box.n;
  if (opt_d->count()) options.d = box.d;
  if (opt_m->count()) options.m = box.m;
  if (opt_nk->count()) options.n_k = box.n_k;
  if (opt_gamma->count()) options.gamma = box.gamma;
  if (opt_tau0->count()) options.tau0 = box.tau0;
  if (opt_cplus->count()) options.cplus = box.cplus;
  if (opt_cminus->count()) options.cminus = box.cminus;
  if (opt_rho0->count()) options.rho0 = box.rho0;
  if (opt_v0s->count()) options.v0_scale = box.v0_scale;
  if (opt_step->count()) options.step = box.step;
  if (opt_horizon->count()) options.horizon = box.horizon;
  if (opt_samples->count()) options.samples = box.samples;
  if (opt_seed->count()) options.seed = box.seed;
  if (opt_out->count()) options.out_dir = box.out;
  options.format = box.format;
  options.kind = box.kind;
  options.variant = box.variant;

  try {
    if (app.got_subcommand(fig1)) return covsde_tools::run_fig1(options);
    if (app.got_subcommand(fig2)) return covsde_tools::run_fig2(options);
    if (app.got_subcommand(fig3)) return covsde_tools::run_fig3(options);
    if (app.got_subcommand(fig4)) return covsde_tools::run_fig4(options);
    if (app.got_subcommand(sde)) return covsde_tools::run_generic_sde(options);
    if (app.got_subcommand(net)) return covsde_tools::run_generic_net(options);
    if (app.got_subcommand(oracle)) return covsde_tools::run_oracle(options);
  } catch (const std::exception& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return 2;
  }
  std::fprintf(stderr, "error: no subcommand selected\n");
  return 2;
}
