#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rank1/amp.hpp"
#include "rank1/prior.hpp"

namespace rank1 {

// Ceiling on prior.size()^n configurations for exact enumeration.
inline constexpr std::uint64_t kMaxEnumerationStates = 200'000;

// Exact posterior summary of one instance, from full enumeration of the
// signal configurations.
struct EnumerationResult {
  Eigen::VectorXd component_means;  // E[X_i | W]
  Eigen::MatrixXd pairwise_means;   // E[X_i X_j | W], symmetric
  double matrix_se = 0.0;           // |s s^T - E[X X^T | W]|_F^2 / n^2
  double vector_se = 0.0;           // |s - E[X | W]|^2 / n
  // log sum_x prior(x) exp(-sum_{i<=j} (w_ij - x_i x_j / sqrt(n))^2 / (2 delta)),
  // Gaussian normalizers not included.
  double log_partition = 0.0;
  double posterior_mass = 0.0;  // sum of normalized weights; 1 up to roundoff
};

// Enumerates all prior.size()^n configurations in mixed-radix order with
// per-prefix incremental likelihood terms; one pass fixes the normalizer,
// a second accumulates moments.  Workers split the leading digits and merge
// partial log-sums by log-sum-exp.  Rejects coupled instances and state
// spaces beyond kMaxEnumerationStates.
EnumerationResult exact_posterior(const Instance& instance,
                                  const DiscretePrior& prior, int workers = 0);

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Scalar-channel mmse at the given snr, by sampling s from the prior and
// y = s + z / sqrt(snr).  Samples are split into 64 fixed chunks with
// counter-derived streams so the result does not depend on the worker count.
MonteCarloEstimate mc_mmse(const DiscretePrior& prior, double snr,
                           std::uint64_t samples, std::uint64_t seed);

struct NishimoriCheck {
  double lhs = 0.0;        // E[S_i S_j E[X_i X_j | W]], averaged over pairs
  double rhs = 0.0;        // E[E[X_i X_j | W]^2], same average
  double std_error = 0.0;  // standard error of the per-instance difference
};

// Both sides of the Nishimori identity averaged over num_instances fresh
// (s, W) draws at dimension n, each evaluated by exact enumeration.
NishimoriCheck nishimori_check(const DiscretePrior& prior, int n, double delta,
                               int num_instances, std::uint64_t seed,
                               int workers = 0);

struct MmseCurvePoint {
  double delta = 0.0;
  double matrix_mmse = 0.0;
  double matrix_std_error = 0.0;
  double vector_mmse = 0.0;
  double vector_std_error = 0.0;
};

// Empirical matrix and vector MMSE at dimension n for each delta, averaged
// over num_instances enumerated instances per point.
std::vector<MmseCurvePoint> finite_size_mmse_curve(
    const DiscretePrior& prior, int n, const std::vector<double>& deltas,
    int num_instances, std::uint64_t seed, int workers = 0);

}  // namespace rank1
