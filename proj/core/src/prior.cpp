#include "rank1/prior.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rank1/util.hpp"

namespace rank1 {

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  QuadratureRule rule;
  rule.order = order;
  if (order == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  // Jacobi matrix of the probabilists' Hermite recurrence: zero diagonal,
  // off-diagonal sqrt(k).  Eigenvalues are the nodes for the N(0,1) weight;
  // squared first eigenvector components are the weights.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int k = 1; k < order; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite: eigensolver failed");

  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    double c = solver.eigenvectors()(0, i);
    rule.weights[i] = c * c;
  }
  // Enforce the exact symmetries of the rule: nodes in +/- pairs, matching
  // weights, total weight one.
  for (int i = 0, j = order - 1; i < j; ++i, --j) {
    double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

const QuadratureRule& default_quadrature() {
  static const QuadratureRule rule = gauss_hermite(61);
  return rule;
}

DiscretePrior::DiscretePrior(std::vector<double> support, std::vector<double> weights) {
  if (support.empty() || support.size() != weights.size())
    throw std::invalid_argument("DiscretePrior: support and weights must be non-empty and equal length");
  std::vector<std::size_t> idx(support.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return support[a] < support[b];
  });
  support_.reserve(support.size());
  weights_.reserve(weights.size());
  double total = 0.0;
  for (std::size_t k : idx) {
    double a = support[k];
    double p = weights[k];
    if (!std::isfinite(a)) throw std::invalid_argument("DiscretePrior: support values must be finite");
    if (!std::isfinite(p) || p <= 0.0)
      throw std::invalid_argument("DiscretePrior: weights must be finite and strictly positive");
    support_.push_back(a);
    weights_.push_back(p);
    total += p;
  }
  for (std::size_t i = 1; i < support_.size(); ++i) {
    double scale = std::max({1.0, std::abs(support_[i - 1]), std::abs(support_[i])});
    if (support_[i] - support_[i - 1] <= 1e-12 * scale)
      throw std::invalid_argument("DiscretePrior: support values must be distinct");
  }
  log_weights_.resize(weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= total;
    log_weights_[i] = std::log(weights_[i]);
    mean_ += weights_[i] * support_[i];
    second_moment_ += weights_[i] * support_[i] * support_[i];
    entropy_ -= weights_[i] * log_weights_[i];
  }
  variance_ = std::max(0.0, second_moment_ - mean_ * mean_);
}

bool DiscretePrior::zero_mean(double tol) const {
  return std::abs(mean_) <= tol * std::max(1.0, std::sqrt(second_moment_));
}

DiscretePrior DiscretePrior::shifted(double eps) const {
  std::vector<double> s(support_.begin(), support_.end());
  for (double& a : s) a += eps;
  return DiscretePrior(s, weights_);
}

DiscretePrior make_prior(std::vector<double> support, std::vector<double> weights) {
  return DiscretePrior(std::move(support), std::move(weights));
}

PosteriorMoments posterior_moments_field(const DiscretePrior& prior, double field,
                                         double precision) {
  if (!std::isfinite(field)) throw std::invalid_argument("posterior: field must be finite");
  if (!(precision >= 0.0) || !std::isfinite(precision))
    throw std::invalid_argument("posterior: precision must be finite and >= 0");
  auto a = prior.support();
  auto lw = prior.log_weights();
  std::size_t nu = a.size();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nu; ++i) {
    double l = lw[i] + a[i] * field - 0.5 * precision * a[i] * a[i];
    if (l > top) top = l;
  }
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < nu; ++i) {
    double l = lw[i] + a[i] * field - 0.5 * precision * a[i] * a[i];
    double e = clipped_exp(l - top);
    z += e;
    m1 += a[i] * e;
    m2 += a[i] * a[i] * e;
  }
  PosteriorMoments out;
  out.mean = std::clamp(m1 / z, prior.min_support(), prior.max_support());
  out.variance = std::max(0.0, m2 / z - out.mean * out.mean);
  return out;
}

PosteriorMoments posterior_moments(const DiscretePrior& prior, double y, double sigma2) {
  if (std::isinf(sigma2) && sigma2 > 0.0) return {prior.mean(), prior.variance()};
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("posterior: sigma2 must be positive (or +inf)");
  if (!std::isfinite(y)) throw std::invalid_argument("posterior: y must be finite");
  return posterior_moments_field(prior, y / sigma2, 1.0 / sigma2);
}

double posterior_mean(const DiscretePrior& prior, double y, double sigma2) {
  return posterior_moments(prior, y, sigma2).mean;
}

double mmse(const DiscretePrior& prior, double snr, const QuadratureRule& quad) {
  if (!(snr >= 0.0)) throw std::invalid_argument("mmse: snr must be >= 0");
  if (snr == 0.0) return prior.variance();
  if (std::isinf(snr)) return 0.0;
  auto a = prior.support();
  auto p = prior.weights();
  double root = std::sqrt(snr);
  double acc = 0.0;
  for (std::size_t b = 0; b < a.size(); ++b) {
    double base = snr * a[b];
    double inner = 0.0;
    for (std::size_t k = 0; k < quad.nodes.size(); ++k) {
      double m = posterior_moments_field(prior, base + root * quad.nodes[k], snr).mean;
      double d = a[b] - m;
      inner += quad.weights[k] * d * d;
    }
    acc += p[b] * inner;
  }
  return acc;
}

double estimator_second_moment(const DiscretePrior& prior, double snr,
                               const QuadratureRule& quad) {
  if (!(snr >= 0.0)) throw std::invalid_argument("estimator_second_moment: snr must be >= 0");
  if (snr == 0.0) return prior.mean() * prior.mean();
  if (std::isinf(snr)) return prior.second_moment();
  auto a = prior.support();
  auto p = prior.weights();
  double root = std::sqrt(snr);
  double acc = 0.0;
  for (std::size_t b = 0; b < a.size(); ++b) {
    double base = snr * a[b];
    double inner = 0.0;
    for (std::size_t k = 0; k < quad.nodes.size(); ++k) {
      double m = posterior_moments_field(prior, base + root * quad.nodes[k], snr).mean;
      inner += quad.weights[k] * m * m;
    }
    acc += p[b] * inner;
  }
  return acc;
}

}  // namespace rank1
