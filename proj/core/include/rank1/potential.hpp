#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rank1/prior.hpp"

namespace rank1 {

// Replica symmetric potential, its stationary structure, and the derived
// thresholds for the rank-one spiked Wigner channel at noise delta.

struct PotentialPoint {
  double e;
  double i_rs;
};

struct PotentialCurve {
  double delta = 0.0;
  std::vector<PotentialPoint> grid;  // E strictly increasing, endpoints 0 and v included
};

enum class StationaryKind { minimum, maximum, inflexion };
enum class Branch { none, good, unstable, bad };

struct StationaryPoint {
  double e = 0.0;
  double potential = 0.0;
  StationaryKind kind = StationaryKind::minimum;
  Branch branch = Branch::none;
};

// Stationary points of E -> i_rs(E; delta) on [0, v], sorted by E.  Every E
// satisfies |E - mmse((v-E)/delta)| <= tol.  Branch labels are set only when
// exactly three points exist.
struct StationaryPoints {
  double delta = 0.0;
  std::vector<StationaryPoint> points;
  const StationaryPoint& global_minimum() const;
};

// More than three stationary points contradicts the standing hypothesis on
// the potential (at most three branches); carries all located roots.
class HypothesisViolation : public std::runtime_error {
 public:
  HypothesisViolation(const std::string& what, std::vector<double> roots);
  const std::vector<double>& roots() const { return roots_; }

 private:
  std::vector<double> roots_;
};

enum class TransitionOrder { none, first_order, higher_order };

struct Thresholds {
  double delta_amp = kPlusInfinity;
  double delta_rs = kPlusInfinity;
  double delta_opt = kPlusInfinity;  // equals delta_rs
  double delta_spectral = 0.0;       // equals v^2 exactly
  TransitionOrder order = TransitionOrder::none;

  static constexpr double kPlusInfinity = std::numeric_limits<double>::infinity();
};

struct MutualInfo {
  double value = 0.0;
  double argmin_e = 0.0;
};

struct MatrixMmse {
  double value = 0.0;
  // At delta = Delta_RS two minimizers tie; both one-sided limits are
  // reported instead of an arbitrary choice.
  bool ambiguous = false;
  double low = 0.0;
  double high = 0.0;
};

struct VectorMmse {
  double value = 0.0;
  // Proven for delta outside [Delta_AMP, Delta_RS]; conjectured inside.
  bool proven = true;
};

// i_rs(E; delta) = ((v-E)^2 + v^2)/(4 delta) - T((v-E)/delta) where T is the
// scalar-channel log-partition expectation over S and Z.  E = v needs no
// special path: the channel strength (v-E)/delta vanishes there and T(0) = 0,
// so the value is exactly v^2/(4 delta).
double i_rs(const DiscretePrior& prior, double e, double delta,
            const QuadratureRule& quad = default_quadrature());

// The T term alone, as a function of the scalar channel strength gamma >= 0.
double scalar_log_partition(const DiscretePrior& prior, double gamma,
                            const QuadratureRule& quad = default_quadrature());

// Roots of g(E) = E - mmse((v-E)/delta): sign-change scan on a uniform grid
// (4096 cells, refined x8 around each change) followed by bisection to
// |dE| <= tol * max(1, v).  Throws HypothesisViolation on more than three.
StationaryPoints stationary_points(const DiscretePrior& prior, double delta,
                                   const QuadratureRule& quad = default_quadrature(),
                                   double tol = 1e-10);

// Asymptotic mutual information per variable: min of i_rs over stationary
// points and the endpoints E = 0, E = v.
MutualInfo mutual_information(const DiscretePrior& prior, double delta,
                              const QuadratureRule& quad = default_quadrature());

// Matrix MMSE (Frobenius norm sense): v^2 - (v - E*)^2 at the potential
// minimizer E*.
MatrixMmse matrix_mmse(const DiscretePrior& prior, double delta,
                       const QuadratureRule& quad = default_quadrature());

// Vector MMSE E*; proven outside [Delta_AMP, Delta_RS], conjectured inside.
// The overload taking Thresholds avoids recomputing them per call.
VectorMmse vector_mmse(const DiscretePrior& prior, double delta,
                       const QuadratureRule& quad = default_quadrature());
VectorMmse vector_mmse(const DiscretePrior& prior, double delta, const Thresholds& thresholds,
                       const QuadratureRule& quad = default_quadrature());

// Algorithmic threshold: supremum of delta for which state evolution from the
// uninformative point reaches the good branch.  For priors with nonzero mean
// this is the lower fold of the fixed-point curve delta(snr) = (v - mmse)/snr,
// polished by bisection on the stationary-point count to relative 1e-6.  For
// zero-mean priors the uninformative point E = v is itself stationary and its
// stability boundary delta = v^2 is exact (mmse'(0) = -Var^2); searches use a
// small support bias over eps in {1e-6, 1e-7} * sqrt(v) and check stability.
// Returns +inf when the fixed point is unique for every delta in
// [lo, hi] (default bracket [1e-6 v^2, 1e3 v^2]).
double find_delta_amp(const DiscretePrior& prior, double lo = 0.0, double hi = 0.0,
                      const QuadratureRule& quad = default_quadrature());

// Information-theoretic threshold: the delta where the good and bad branch
// potentials cross (bisection to relative 1e-9 on the sign of the difference).
// Falls back to the higher-order transition point (= Delta_AMP) when no
// coexistence region exists, and +inf when min i_rs is analytic in delta.
double find_delta_rs(const DiscretePrior& prior,
                     const QuadratureRule& quad = default_quadrature());

// All four thresholds plus the transition order flag.
Thresholds compute_thresholds(const DiscretePrior& prior,
                              const QuadratureRule& quad = default_quadrature());

// Boundary rho* of the first-order region for a prior family rho -> P(rho):
// bisection on "delta_rs exceeds delta_amp by more than gap_rel relative"
// to absolute tolerance rho_tol.  The family must be first-order at exactly
// one end of [rho_lo, rho_hi].
double first_order_boundary(const std::function<DiscretePrior(double)>& family,
                            double rho_lo, double rho_hi, double rho_tol = 1e-5,
                            double gap_rel = 1e-7,
                            const QuadratureRule& quad = default_quadrature());

// Smallest-E (good) and largest-E (bad) stationary branches at the given
// delta; throws std::domain_error when the requested branch does not exist.
double good_branch_e(const DiscretePrior& prior, double delta,
                     const QuadratureRule& quad = default_quadrature());
double bad_branch_e(const DiscretePrior& prior, double delta,
                    const QuadratureRule& quad = default_quadrature());

// Uniform sampling of the potential on [0, v] with n >= 2 points.
PotentialCurve potential_curve(const DiscretePrior& prior, double delta, std::size_t n,
                               const QuadratureRule& quad = default_quadrature());

}  // namespace rank1
