#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rank1/prior.hpp"
#include "rank1/state_evolution.hpp"

namespace rank1 {

// Block layout of a spatially coupled instance.  Coordinate i belongs to
// block i / block_size; seed blocks are revealed to the algorithm as side
// information and their coordinates stay pinned to the signal.
struct CoupledLayout {
  int block_size = 0;
  CouplingMatrix lambda;
  std::vector<int> seed_blocks;
};

// Synthetic observation of the rank-one model,
//   w_ij = s_i s_j / sqrt(n) + z_ij sqrt(delta),
// or the coupled variant where the signal term of block pair (mu, nu)
// carries sqrt(lambda(mu, nu) / block_size) instead of 1/sqrt(n).  The
// stored matrix is the raw observation; channel scaling is applied by the
// consumers that need it.
struct Instance {
  int n = 0;  // total dimension
  double delta = 0.0;
  Eigen::MatrixXd w;       // symmetric n x n
  Eigen::VectorXd signal;  // ground truth s
  std::optional<CoupledLayout> coupling;
};

// Draw order is fixed for reproducibility: all signal entries first
// (inverse-CDF on the prior weights), then one normal per observation in
// row-major order over i <= j.  The diagonal is generated like any other
// entry and consumed unchanged by amp_run; its influence is O(1/n).
Instance generate_instance(const DiscretePrior& prior, int n, double delta,
                           std::uint64_t seed);

// Coupled instance on the ring {0..length} with the triangle kernel.  Total
// dimension is block_size * (length + 1).  Entries with |mu - nu| > window
// carry pure noise (the kernel weight is exactly zero there).
Instance generate_coupled_instance(const DiscretePrior& prior, int block_size,
                                   int length, int window, double delta,
                                   std::uint64_t seed);

enum class NoiseSchedule {
  // Effective snr estimated from the empirical second moment of the current
  // iterate, q = |x|^2 / n (Nishimori: overlap and second moment agree).
  // Default: it stays synchronized with the instance's actual transition
  // time, which fluctuates O(1) iterations from seed to seed.
  kAdaptive,
  // Deterministic schedule from the state evolution recursion run alongside
  // the iteration.  Diverges through sharp transitions when the instance
  // escapes the uninformative region earlier or later than the recursion
  // (the denoiser is then calibrated for the wrong field strength), so this
  // variant is for studying that mismatch, not for estimation.
  kSeCalibrated,
};

struct AmpState {
  Eigen::VectorXd x;       // current estimate
  Eigen::VectorXd x_prev;  // previous estimate
  // Effective noise sigma^2 = delta / q used by each denoising step; for
  // coupled runs this is the mean over non-seed blocks.
  std::vector<double> effective_noise;
  // Vector MSE against the ground truth; index 0 is the initialization, one
  // more entry per completed iteration.
  std::vector<double> mse_trace;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;  // non-finite iterate; trace up to the failure kept
};

// Operator form of the iteration for consumers that cannot afford a dense
// matrix.  score_matvec must return (1 / sqrt(block_size)) * W~ x where
// W~_ij = w_ij * sqrt(lambda(block(i), block(j))); for uncoupled problems
// block_size = n and W~ = W.  The engine trusts the caller on signal
// support and matrix symmetry.
struct AmpProblem {
  int n = 0;
  double delta = 0.0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> score_matvec;
  Eigen::VectorXd signal;  // ground truth, used for the MSE trace
  // Coupled geometry; leave lambda null for uncoupled problems.
  const CouplingMatrix* lambda = nullptr;
  int block_size = 0;
  std::vector<int> seed_blocks;
};

// Bayes AMP with the Onsager correction
//   x^{t+1} = eta((W / sqrt(n)) x^t - b_t x^{t-1}),
// eta the posterior mean at the scheduled effective noise and b_t the mean
// analytic posterior variance of the step that produced x^t (per block and
// kernel-mixed in the coupled case).  Initialization is the prior mean plus
// a uniform perturbation of magnitude 1e-3 sqrt(v) from a fixed internal
// stream, so repeated runs on one instance are bitwise identical and
// randomness across experiments comes from the instance seed.  Stops when
// the sup-norm change drops below tol.  Damping in [0, 1) mixes the new
// estimate with the previous one; the Onsager term is exact only at 0.
AmpState amp_run(const Instance& instance, const DiscretePrior& prior,
                 int max_iter = 200, double tol = 1e-7, double damping = 0.0,
                 NoiseSchedule schedule = NoiseSchedule::kAdaptive,
                 const QuadratureRule* quad = nullptr);

AmpState amp_run_operator(const AmpProblem& problem, const DiscretePrior& prior,
                          int max_iter = 200, double tol = 1e-7,
                          double damping = 0.0,
                          NoiseSchedule schedule = NoiseSchedule::kAdaptive,
                          const QuadratureRule* quad = nullptr);

struct SpectralResult {
  Eigen::VectorXd estimate;  // rescaled so |estimate|^2 = |signal|^2
  double overlap = 0.0;      // |<estimate, s>| / (|estimate| |s|)
  double eigenvalue = 0.0;   // Rayleigh quotient of W / sqrt(n) at the iterate
  int iterations = 0;
  bool converged = false;  // false after 1e4 steps without direction lock
};

// Top eigenvector of W / sqrt(n) by power iteration on the squared matrix
// (insensitive to the sign of the extreme eigenvalue, which matters for
// zero-mean priors where the spectrum is nearly symmetric), direction
// tolerance 1e-8.  The estimate is rescaled to the empirical second moment
// of the stored signal; overlap is reported in absolute value because a
// global sign is unidentifiable.
SpectralResult spectral_estimate(const Instance& instance);

// Same iteration on an operator; matvec must apply W / sqrt(n).
SpectralResult spectral_estimate_operator(
    int n, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& matvec,
    const Eigen::VectorXd& signal);

// |s s^T - x x^T|_F^2 / n^2 and |s - x|^2 / n.  The matrix metric expands to
// ((s.s)^2 - 2 (s.x)^2 + (x.x)^2) / n^2, so no n x n object is formed.
double matrix_mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& signal);
double vector_mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& signal);

// CSV dump, one value list per line:
//   n,<int>
//   delta,<float>
//   coupled,<0|1>
//   geometry,<block_size>,<length>,<window>   (coupled instances only)
//   signal,<s_0>,...,<s_{n-1}>
//   w,<w_ii>,...,<w_{i,n-1}>                  (n lines, upper triangle)
// Floats are written with enough digits to round-trip exactly.
void save_instance(const Instance& instance, const std::string& path);
Instance load_instance(const std::string& path);

}  // namespace rank1
