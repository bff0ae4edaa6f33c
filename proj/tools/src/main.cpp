#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "rank1/prior.hpp"
#include "rank1/util.hpp"

#include "commands.hpp"
#include "config.hpp"

namespace {

using rank1::cli::Context;

int resolve_workers(int flag_value) {
  // Environment beats the flag, the flag beats the hardware default.
  if (const char* env = std::getenv("RANK1_PHASE_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  if (flag_value > 0) return flag_value;
  return rank1::default_workers();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank1-phase: asymptotic mutual information, thresholds, and"
               " finite-size experiments for rank-one matrix estimation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int workers = 0;
  int quad_order = 0;
  double tol = std::nan("");

  app.add_option("--config", config_path, "experiment config, INI sections or JSON");
  app.add_option("--out", out_dir, "output directory, created if missing");
  app.add_option("--seed", seed, "master seed for instance generation");
  app.add_option("--workers", workers,
                 "worker threads (RANK1_PHASE_WORKERS overrides, 0 = auto)");
  app.add_option("--quad-order", quad_order,
                 "Gauss-Hermite order for prior expectations (0 = default 61)");
  app.add_option("--tol", tol, "override the per-command tolerance key");

  const std::map<std::string, std::pair<std::string, int (*)(const Context&)>> commands = {
      {"potential", {"replica potential curves with stationary points", rank1::cli::cmd_potential}},
      {"thresholds", {"algorithmic and information-theoretic thresholds", rank1::cli::cmd_thresholds}},
      {"phase-diagram", {"threshold sweep over a prior family", rank1::cli::cmd_phase_diagram}},
      {"se", {"scalar state evolution trajectory", rank1::cli::cmd_se}},
      {"coupled-se", {"spatially coupled state evolution profile", rank1::cli::cmd_coupled_se}},
      {"amp", {"approximate message passing on a sampled instance", rank1::cli::cmd_amp}},
      {"spectral", {"leading-eigenvector estimation on sampled instances", rank1::cli::cmd_spectral}},
      {"community", {"two-group graph: edge list, spectral and AMP recovery", rank1::cli::cmd_community}},
      {"oracle", {"exact and Monte Carlo finite-size posteriors", rank1::cli::cmd_oracle}},
  };
  for (const auto& [name, cmd] : commands) {
    app.add_subcommand(name, cmd.first);
  }

  CLI11_PARSE(app, argc, argv);

  std::string name = app.get_subcommands().front()->get_name();
  try {
    if (config_path.empty()) {
      throw rank1::cli::ConfigError("--config is required");
    }
    Context ctx;
    ctx.config = rank1::cli::ExperimentConfig::from_file(config_path);
    ctx.out_dir = out_dir;
    ctx.seed = seed;
    ctx.workers = resolve_workers(workers);
    ctx.quad = quad_order > 0 ? rank1::gauss_hermite(quad_order)
                              : rank1::default_quadrature();
    if (!std::isnan(tol)) {
      if (tol <= 0.0) throw rank1::cli::ConfigError("--tol must be positive");
      ctx.tol = tol;
    }
    ctx.command = name;
    std::filesystem::create_directories(out_dir);
    return commands.at(name).second(ctx);
  } catch (const std::exception& err) {
    nlohmann::json envelope = {
        {"error", {{"command", name}, {"message", err.what()}}}};
    std::cerr << envelope.dump() << "\n";
    return 1;
  }
}
