#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "covsde/parallel.hpp"
#include "covsde_tools/drivers.hpp"
#include "driver_util.hpp"

namespace covsde_tools {

using covsde::FlatIndexMap;
using covsde::NetVariant;
using detail::put;

namespace {

covsde::CoeffKind parse_kind(const std::string& kind) {
  if (kind == "resnet") return covsde::CoeffKind::resnet;
  if (kind == "attention") return covsde::CoeffKind::attention;
  if (kind == "transformer") return covsde::CoeffKind::transformer;
  throw std::invalid_argument("unknown coefficient kind: " + kind);
}

NetVariant parse_variant(const std::string& variant) {
  if (variant == "shaped_attention") return NetVariant::shaped_attention;
  if (variant == "vanilla_softmax") return NetVariant::vanilla_softmax;
  if (variant == "pre_ln") return NetVariant::pre_ln;
  if (variant == "resnet_relu") return NetVariant::resnet_relu;
  if (variant == "shaped_transformer") return NetVariant::shaped_transformer;
  throw std::invalid_argument("unknown architecture variant: " + variant);
}

std::vector<std::string> state_column_names(const FlatIndexMap& map) {
  std::vector<std::string> names;
  for (int k = 0; k < map.size(); ++k) {
    const auto [a, b] = map.pair_at(k);
    names.push_back("v" + std::to_string(a) + "_" + std::to_string(b));
  }
  return names;
}

}  // namespace

int run_generic_sde(const RunOptions& options) {
  const detail::Timer timer;
  const int n = options.n.value_or(300);
  const int d = options.d.value_or(100);
  const int m = options.m.value_or(2);
  const double gamma = options.gamma.value_or(1.0 / std::sqrt(2.0));
  const double tau0 = options.tau0.value_or(1.0);
  const double cplus = options.cplus.value_or(0.0);
  const double cminus = options.cminus.value_or(-1.0);
  const double rho0 = options.rho0.value_or(0.2);
  const double scale = options.v0_scale.value_or(1.0);
  const double h = options.step.value_or(0.01);
  const double horizon = options.horizon.value_or(static_cast<double>(d) / n);
  const long long samples = options.samples.value_or(1024);
  const std::uint64_t seed = options.seed.value_or(1);
  const std::filesystem::path out_dir = options.out_dir.value_or("sde_out");

  covsde::SdeConfig config;
  config.h = h;
  config.horizon = horizon;
  config.kind = parse_kind(options.kind);

  covsde::CoeffParams params;
  params.gamma = gamma;
  params.tau0 = tau0;
  params.cplus = cplus;
  params.cminus = cminus;
  params.m = m;

  const covsde::TokenCovariance v0 = equicorrelated_v0(m, rho0, scale);

  ConfigList config_list;
  put(config_list, "subcommand", "sde");
  put(config_list, "kind", options.kind);
  put(config_list, "m", m);
  put(config_list, "gamma", gamma);
  put(config_list, "tau0", tau0);
  put(config_list, "cplus", cplus);
  put(config_list, "cminus", cminus);
  put(config_list, "rho0", rho0);
  put(config_list, "v0_scale", scale);
  put(config_list, "step", h);
  put(config_list, "horizon", horizon);
  put(config_list, "eig_lower", config.eig_lower);
  put(config_list, "eig_upper", config.eig_upper);
  put(config_list, "samples", samples);
  put(config_list, "seed", seed);
  put(config_list, "format", options.format);

  std::vector<double> stop_times;
  const covsde::Ensemble ensemble =
      run_sde_ensemble(config, params, v0, samples, seed, /*keep_trajectories=*/false,
                       &stop_times);

  const FlatIndexMap map(m);
  Table table;
  table.header = {"sample"};
  for (const std::string& name : state_column_names(map)) table.header.push_back(name);
  table.header.push_back("stop_time");
  table.header.push_back("stopped");
  for (long long i = 0; i < samples; ++i) {
    std::vector<Cell> row;
    row.emplace_back(i);
    for (int k = 0; k < map.size(); ++k) row.emplace_back(ensemble.terminal(static_cast<int>(i), k));
    const double t = stop_times[static_cast<std::size_t>(i)];
    row.emplace_back(t);
    row.emplace_back(static_cast<long long>(t < horizon ? 1 : 0));
    table.add_row(std::move(row));
  }
  const std::filesystem::path path =
      write_table(out_dir, "terminal_states", options.format, config_list, table);
  std::printf("sde: wrote %s (%lld samples)  [%.1fs]\n", path.string().c_str(), samples,
              timer.seconds());
  return 0;
}

int run_generic_net(const RunOptions& options) {
  const detail::Timer timer;
  const NetVariant variant = parse_variant(options.variant);
  covsde::NetConfig config;
  config.n = options.n.value_or(300);
  config.d = options.d.value_or(100);
  config.m = options.m.value_or(2);
  config.n_k = options.n_k.value_or(64);
  config.gamma = options.gamma.value_or(1.0 / std::sqrt(2.0));
  config.lambda = std::sqrt(std::max(0.0, 1.0 - config.gamma * config.gamma));
  config.tau0 = options.tau0.value_or(1.0);
  config.cplus = options.cplus.value_or(0.0);
  config.cminus = options.cminus.value_or(-1.0);
  config.variant = variant;
  config.enforce_branch_norm = true;
  if (variant == NetVariant::pre_ln) {
    config.lambda = 1.0;
    config.gamma = 1.0;
    config.enforce_branch_norm = false;
  }
  const double rho0 = options.rho0.value_or(0.2);
  const double scale = options.v0_scale.value_or(1.0);
  const long long samples = options.samples.value_or(1024);
  const std::uint64_t seed = options.seed.value_or(1);
  const std::filesystem::path out_dir = options.out_dir.value_or("net_out");
  config.validate();
  if (samples < 1 || samples > 1 << 30) {
    throw std::invalid_argument("net: sample count must be in [1, 2^30]");
  }

  const covsde::TokenCovariance v0 = equicorrelated_v0(config.m, rho0, scale);

  ConfigList config_list;
  put(config_list, "subcommand", "net");
  put(config_list, "variant", options.variant);
  put(config_list, "n", config.n);
  put(config_list, "d", config.d);
  put(config_list, "m", config.m);
  put(config_list, "n_k", config.n_k);
  put(config_list, "gamma", config.gamma);
  put(config_list, "lambda", config.lambda);
  put(config_list, "tau0", config.tau0);
  put(config_list, "cplus", config.cplus);
  put(config_list, "cminus", config.cminus);
  put(config_list, "rho0", rho0);
  put(config_list, "v0_scale", scale);
  put(config_list, "samples", samples);
  put(config_list, "seed", seed);
  put(config_list, "format", options.format);

  // Run directly (not through run_net_ensemble): the per-sample stop and
  // non-finite layer indices are part of this command's output.
  const FlatIndexMap map(config.m);
  const int count = static_cast<int>(samples);
  std::vector<covsde::NetTrajectory> runs(static_cast<std::size_t>(count));
  covsde::parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    covsde::NetTrajectory t = covsde::forward_network(config, v0, derive_seed(seed, i));
    t.v = {t.v.back()};  // keep only the terminal state
    runs[i] = std::move(t);
  });

  Table table;
  table.header = {"sample"};
  for (const std::string& name : state_column_names(map)) table.header.push_back(name);
  table.header.push_back("stop_layer");
  table.header.push_back("nonfinite_layer");
  table.header.push_back("stop_time");
  for (int i = 0; i < count; ++i) {
    const covsde::NetTrajectory& t = runs[static_cast<std::size_t>(i)];
    std::vector<Cell> row;
    row.emplace_back(static_cast<long long>(i));
    for (int k = 0; k < map.size(); ++k) row.emplace_back(t.v.back()[static_cast<std::size_t>(k)]);
    row.emplace_back(static_cast<long long>(t.stop_layer));
    row.emplace_back(static_cast<long long>(t.nonfinite_layer));
    row.emplace_back(t.stop_time);
    table.add_row(std::move(row));
  }
  const std::filesystem::path path =
      write_table(out_dir, "terminal_states", options.format, config_list, table);
  std::printf("net: wrote %s (%lld samples)  [%.1fs]\n", path.string().c_str(), samples,
              timer.seconds());
  return 0;
}

}  // namespace covsde_tools
