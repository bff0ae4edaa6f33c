#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rank1/amp.hpp"
#include "rank1/prior.hpp"
#include "rank1/util.hpp"

namespace rank1 {

// Element-wise observation channel P_out(w | y).  The matrix model observes
// w_ij through P_out(. | s_i s_j / sqrt(n)); universality reduces any smooth
// channel to additive Gaussian noise whose variance is the inverse Fisher
// information at y = 0.
struct OutputChannel {
  // log P_out(w | y)
  std::function<double(double w, double y)> log_likelihood;
  // draw w ~ P_out(. | y)
  std::function<double(double y, Rng&)> sample;
  // d/dy log P_out(w | y) at y = 0 when a closed form exists; when empty the
  // Fisher estimator uses a central difference with step 1e-5.
  std::function<double(double w)> score_at_zero;
  // Fisher information at y = 0 when known analytically.  An explicit 0
  // declares a channel that carries no information about y.
  std::optional<double> fisher;
};

// Additive Gaussian noise of the given variance.
OutputChannel gaussian_channel(double variance);

// Edge observation of the community model: w in {0, 1} with
// P(w = 1 | y) = p + mu y.  Fisher information at 0 is mu^2 / (p (1 - p)).
// mu = 0 is legal and non-informative.
OutputChannel bernoulli_edge_channel(double p, double mu);

// The base channel observed through w -> scale * w.  A smooth bijection of
// the output leaves the Fisher information unchanged, but the closed forms
// are deliberately dropped so the result exercises the Monte Carlo and
// finite-difference paths against that known value.
OutputChannel scaled_channel(OutputChannel base, double scale);

struct EffectiveNoise {
  double value = 0.0;      // 1 / Fisher(0); +infinity for a flat channel
  double std_error = 0.0;  // 0 on the analytic path
  bool analytic = false;
  std::string note;  // "non-informative channel" when Fisher is 0
};

inline constexpr std::uint64_t kFisherSeed = 0xa4093822299f31d0ull;

// Effective noise 1 / E[(d/dy log P_out(W | 0))^2] with W ~ P_out(. | 0).
// Uses the channel's closed form when present, else Monte Carlo.
EffectiveNoise effective_noise(const OutputChannel& channel,
                               std::uint64_t samples = 1'000'000,
                               std::uint64_t seed = kFisherSeed);

// Monte Carlo estimate regardless of any closed form, with its standard
// error.  Scores come from score_at_zero when set, else central differences;
// a non-finite score aborts with a domain error.
EffectiveNoise effective_noise_mc(const OutputChannel& channel,
                                  std::uint64_t samples = 1'000'000,
                                  std::uint64_t seed = kFisherSeed);

// Two-group prior of the community model: +sqrt((1-rho)/rho) with
// probability rho, -sqrt(rho/(1-rho)) with probability 1-rho.  Mean 0 and
// unit variance for every rho.
DiscretePrior community_detection_prior(double rho);

// Undirected simple graph from the balanced two-community model.  The edge
// probability p + mu s_i s_j / sqrt(n) evaluates to one of three values
// (within the small group, within the large group, across) arranged so both
// groups keep mean degree p n.
struct CommunityGraph {
  int n = 0;
  double rho = 0.0;
  double p = 0.0;
  double mu = 0.0;
  Eigen::VectorXd signal;                  // community value per node
  std::vector<std::pair<int, int>> edges;  // i < j; no self loops
  double effective_noise = 0.0;            // p (1 - p) / mu^2
};

// Draw order: one uniform per node (group membership), then one uniform per
// pair i < j in row-major order.  Rejects parameters for which any of the
// three link probabilities leaves (0, 1).
CommunityGraph generate_community_graph(double rho, double p, double mu, int n,
                                        std::uint64_t seed);

// Centered, rescaled observations (a_ij - p) / mu as an Instance of the
// additive-noise model at delta = p (1 - p) / mu^2.  The diagonal is 0
// (self loops are excluded from the graph); its influence is O(1/n).
Instance community_equivalent_instance(const CommunityGraph& graph);

// Matrix-free form of the same observations for sizes where the dense matrix
// does not fit: returns x -> (A x - p (sum(x) - x)) / (mu sqrt(n)), the
// score_matvec of an uncoupled AmpProblem.
std::function<Eigen::VectorXd(const Eigen::VectorXd&)> community_score_matvec(
    const CommunityGraph& graph);

// Text export, one "i j" edge per line after '#' metadata lines.
void save_edge_list(const CommunityGraph& graph, const std::string& path);

}  // namespace rank1
