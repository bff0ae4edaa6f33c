#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rank1/prior.hpp"

#include "config.hpp"

namespace rank1::cli {

// Everything a subcommand needs, resolved once in main: worker precedence is
// RANK1_PHASE_WORKERS, then --workers, then the hardware default, and --tol
// (when given) overrides the per-command tolerance keys.
struct Context {
  ExperimentConfig config;
  std::string out_dir;
  std::uint64_t seed = 1;
  int workers = 0;
  QuadratureRule quad;
  std::optional<double> tol;
  std::string command;

  std::string out_path(const std::string& name) const;
  double tolerance(const std::string& key, double fallback) const;
};

int cmd_potential(const Context& ctx);
int cmd_thresholds(const Context& ctx);
int cmd_phase_diagram(const Context& ctx);
int cmd_se(const Context& ctx);
int cmd_coupled_se(const Context& ctx);
int cmd_amp(const Context& ctx);
int cmd_spectral(const Context& ctx);
int cmd_community(const Context& ctx);
int cmd_oracle(const Context& ctx);

}  // namespace rank1::cli
