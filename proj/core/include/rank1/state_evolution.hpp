#pragma once

#include <vector>

#include "rank1/prior.hpp"

namespace rank1 {

// One run of the scalar state-evolution recursion E^{t+1} = mmse((v-E^t)/Delta)
// started from E^0 = v.
struct SETrajectory {
  double delta = 0.0;
  std::vector<double> iterates;  // E^0, E^1, ...
  bool converged = false;
  double fixed_point = 0.0;
};

// Circulant coupling kernel on the ring {0..L}.  Only the per-distance
// coefficients are stored; entries vanish beyond circular distance w.
class CouplingMatrix {
 public:
  CouplingMatrix(int length, int window, std::vector<double> coeffs);

  int size() const { return length_ + 1; }  // number of blocks, L+1
  int length() const { return length_; }    // L
  int window() const { return window_; }

  // Entry at circular distance |mu - nu| mod (L+1).
  double operator()(int mu, int nu) const;

  // Full first row, length L+1.
  std::vector<double> first_row() const;

  // Circular convolution y_mu = sum_nu entry(mu, nu) * x_nu.
  std::vector<double> apply(const std::vector<double>& x) const;

 private:
  int length_ = 0;
  int window_ = 0;
  std::vector<double> coeffs_;  // coefficient at distance d, d in [0, w]
};

// Triangle kernel of base 2w+1 and height 1/(w+1):
// entry = (1 - d/(w+1)) / (w+1) at circular distance d <= w.  Rows sum to one
// in closed form.  Requires L even and 0 <= w <= L/2.
CouplingMatrix triangle_coupling(int L, int w);

// Per-block MSE profile of the coupled system.  Seed blocks are pinned to
// zero (perfect knowledge of those signal sections).
struct CoupledProfile {
  std::vector<double> values;  // E_mu, mu in {0..L}
  std::vector<int> seed_set;   // sorted block indices B
};

// Seed convention used throughout: B = {0..w-1} union {L-w..L}, a contiguous
// arc of 2w+1 blocks across the ring origin.  The ring is translation
// invariant, so this is the centered-arc convention up to relabeling.
std::vector<int> seed_blocks(int L, int w);

struct CoupledSEResult {
  CoupledProfile profile;
  int iterations = 0;
  bool converged = false;
};

// One step of the uncoupled recursion.  E must lie in [0, v].
double se_step(const DiscretePrior& prior, double e, double delta,
               const QuadratureRule& quad = default_quadrature());

// Full uncoupled run from E^0 = v until |E^{t+1} - E^t| < tol or max_iter
// steps.  Hitting max_iter flags the trajectory unconverged, no exception.
// Zero-mean priors make E = v an exact fixed point, so they are biased by a
// support shift of 1e-6 * sqrt(v) for the run (the reported values change
// only at order eps^2).
SETrajectory se_run(const DiscretePrior& prior, double delta, double tol = 1e-9,
                    int max_iter = 10000,
                    const QuadratureRule& quad = default_quadrature());

// One step of the coupled recursion: per-block effective snr
// (v - (Lambda E)_mu) / Delta, seed blocks forced back to zero.
CoupledProfile coupled_se_step(const DiscretePrior& prior,
                               const CoupledProfile& profile,
                               const CouplingMatrix& lambda, double delta,
                               const QuadratureRule& quad = default_quadrature());

// Coupled run on the ring {0..L} with the triangle kernel: seeds at zero,
// E^0 = v elsewhere, iterated until the sup-norm change drops below tol.
// The iteration is componentwise non-increasing.  Same zero-mean bias rule
// as se_run.
CoupledSEResult coupled_se_run(const DiscretePrior& prior, int L, int w,
                               double delta, double tol = 1e-9,
                               int max_iter = 10000,
                               const QuadratureRule& quad = default_quadrature());

// Replica potential of the coupled system:
//   sum_{mu,nu} Lambda_{mu nu} (v-E_mu)(v-E_nu) / (4 Delta) - sum_mu T(gamma_mu)
// with gamma_mu the per-block effective snr.  The additive constant
// (2w+1) L v^2 / (4 Delta) of the full expression is omitted; with the
// identity kernel and a uniform profile the sum reduces to
// (L+1) * (i_rs(E; Delta) - v^2/(4 Delta)).
double coupled_potential(const DiscretePrior& prior,
                         const CoupledProfile& profile,
                         const CouplingMatrix& lambda, double delta,
                         const QuadratureRule& quad = default_quadrature());

// Diagnostic for the shift argument behind threshold saturation.  From a
// coupled fixed point at delta (the wave must stall, so delta should sit
// above the coupled threshold) it builds the saturated profile E^s: left of
// the first crossing of E_good the profile is clamped to E_good, right of the
// interior maximum to that maximum, the rising section kept as is.  The
// profile is then shifted one block to the right and both are evaluated with
// the wrap entries of the kernel dropped (the chain restriction; on the ring
// a shift leaves the potential exactly invariant, while on the chain the
// constant end zones cancel in the difference, which is the paper quantity).
// The difference decays like 1/w.
struct ShiftDiagnostic {
  bool nontrivial = false;  // false: the wave reached E_good everywhere
  double difference = 0.0;  // potential(shifted) - potential(saturated)
  double potential_saturated = 0.0;
  double potential_shifted = 0.0;
  double e_good = 0.0;
  double e_max = 0.0;
  int mu_inf = -1;  // last block at or below E_good before the front
  int mu_max = -1;  // interior argmax
  bool converged = false;
};

ShiftDiagnostic shift_diagnostic(const DiscretePrior& prior, int w, int L,
                                 double delta,
                                 const QuadratureRule& quad = default_quadrature());

// Sweep of the coupled algorithmic threshold: for each grid Delta, run
// coupled SE and test whether every non-seed block ends within tol of
// E_good(Delta); then refine the success/failure boundary by bisection.
// Runs across the grid execute in parallel.
struct SaturationResult {
  std::vector<double> deltas;        // ascending grid
  std::vector<double> max_interior;  // max non-seed value at termination
  std::vector<char> succeeded;       // per grid point
  std::vector<char> converged;       // sup-change below tol at termination;
                                     // successful runs stop as soon as the
                                     // success level is reached, usually earlier
  double delta_amp_wl = 0.0;  // largest verified-success Delta
  bool crossing_found = false;  // false: grid endpoint reported instead
};

SaturationResult threshold_saturation_experiment(
    const DiscretePrior& prior, int w, int L,
    const std::vector<double>& delta_grid, double tol = 1e-6,
    double refine_rel = 1e-3, int max_iter = 10000,
    const QuadratureRule& quad = default_quadrature());

// True when the non-seed arc of the profile rises at most once and falls at
// most once (plateaus allowed): the unimodal shape of coupled fixed points.
// Changes smaller than deadband are treated as flat.
bool profile_unimodal(const CoupledProfile& profile, double deadband = 1e-12);

}  // namespace rank1
