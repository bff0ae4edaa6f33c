#pragma once

#include <span>
#include <vector>

namespace rank1 {

// Nodes and weights for expectations against the standard normal density:
// E[f(Z)] ~= sum_k weights[k] * f(nodes[k]).  Weights sum to one and nodes
// are symmetric about zero.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;
};

// Gauss-Hermite rule in the probabilists' normalization, computed by
// Golub-Welsch.  Exact for polynomials of degree <= 2*order - 1.
QuadratureRule gauss_hermite(int order);

// Shared default rule, order 61.
const QuadratureRule& default_quadrature();

// Finitely supported signal prior.  Support values are kept sorted and
// weights normalized; moments are cached at construction.
class DiscretePrior {
 public:
  DiscretePrior(std::vector<double> support, std::vector<double> weights);

  std::span<const double> support() const { return support_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> log_weights() const { return log_weights_; }
  std::size_t size() const { return support_.size(); }

  double mean() const { return mean_; }
  double second_moment() const { return second_moment_; }
  double variance() const { return variance_; }
  double entropy() const { return entropy_; }  // nats
  double min_support() const { return support_.front(); }
  double max_support() const { return support_.back(); }

  bool zero_mean(double tol = 1e-12) const;

  // Same weights with every support point moved by eps.  Used to break the
  // degenerate fixed point of zero-mean priors in threshold searches.
  DiscretePrior shifted(double eps) const;

 private:
  std::vector<double> support_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  double mean_ = 0.0;
  double second_moment_ = 0.0;
  double variance_ = 0.0;
  double entropy_ = 0.0;
};

DiscretePrior make_prior(std::vector<double> support, std::vector<double> weights);

struct PosteriorMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Posterior of the scalar Gaussian channel y = s + sigma * z.  sigma2 may be
// +infinity (no observation: prior moments).  All exponentials are handled
// in log domain.
PosteriorMoments posterior_moments(const DiscretePrior& prior, double y, double sigma2);
double posterior_mean(const DiscretePrior& prior, double y, double sigma2);

// Same posterior parametrized by its exponential family form
// exp(field * x - precision * x^2 / 2); precision = snr, field = snr*s + sqrt(snr)*z
// for a channel observation at signal-to-noise ratio snr.  precision may be 0.
PosteriorMoments posterior_moments_field(const DiscretePrior& prior, double field,
                                         double precision);

// Minimum mean squared error of the scalar channel at the given snr.
// snr = 0 returns the prior variance exactly; +infinity returns 0.
double mmse(const DiscretePrior& prior, double snr,
            const QuadratureRule& quad = default_quadrature());

// E over S and Z of the squared posterior mean.  Equals E[S^2] - mmse(snr)
// for the exact channel, but as a sum of nonnegative terms it keeps full
// relative accuracy where that difference cancels (snr -> 0 with a zero-mean
// prior), which threshold searches on the fixed-point curve rely on.
double estimator_second_moment(const DiscretePrior& prior, double snr,
                               const QuadratureRule& quad = default_quadrature());

}  // namespace rank1
