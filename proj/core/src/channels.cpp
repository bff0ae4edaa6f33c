#include "rank1/channels.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

namespace rank1 {
namespace {

constexpr double kFdStep = 1e-5;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

OutputChannel gaussian_channel(double variance) {
  require(variance > 0.0 && std::isfinite(variance),
          "gaussian_channel: variance must be positive");
  OutputChannel ch;
  const double norm = -0.5 * std::log(2.0 * M_PI * variance);
  ch.log_likelihood = [variance, norm](double w, double y) {
    const double r = w - y;
    return norm - r * r / (2.0 * variance);
  };
  const double sigma = std::sqrt(variance);
  ch.sample = [sigma](double y, Rng& rng) { return y + sigma * rng.normal(); };
  ch.score_at_zero = [variance](double w) { return w / variance; };
  ch.fisher = 1.0 / variance;
  return ch;
}

OutputChannel bernoulli_edge_channel(double p, double mu) {
  require(p > 0.0 && p < 1.0, "bernoulli_edge_channel: p outside (0, 1)");
  require(std::isfinite(mu), "bernoulli_edge_channel: mu must be finite");
  OutputChannel ch;
  ch.log_likelihood = [p, mu](double w, double y) {
    const double q = p + mu * y;
    return w * std::log(q) + (1.0 - w) * std::log1p(-q);
  };
  ch.sample = [p, mu](double y, Rng& rng) {
    const double q = p + mu * y;
    if (!(q >= 0.0 && q <= 1.0))
      throw std::domain_error("bernoulli_edge_channel: p + mu y outside [0, 1]");
    return rng.uniform() < q ? 1.0 : 0.0;
  };
  ch.score_at_zero = [p, mu](double w) {
    return mu * (w / p - (1.0 - w) / (1.0 - p));
  };
  ch.fisher = mu * mu / (p * (1.0 - p));
  return ch;
}

OutputChannel scaled_channel(OutputChannel base, double scale) {
  require(scale != 0.0 && std::isfinite(scale),
          "scaled_channel: scale must be finite and nonzero");
  require(static_cast<bool>(base.log_likelihood) &&
              static_cast<bool>(base.sample),
          "scaled_channel: base channel incomplete");
  OutputChannel ch;
  const double log_jac = std::log(std::abs(scale));
  ch.log_likelihood = [ll = base.log_likelihood, scale, log_jac](double w,
                                                                 double y) {
    return ll(w / scale, y) - log_jac;
  };
  ch.sample = [s = base.sample, scale](double y, Rng& rng) {
    return scale * s(y, rng);
  };
  return ch;
}

EffectiveNoise effective_noise(const OutputChannel& channel,
                               std::uint64_t samples, std::uint64_t seed) {
  if (channel.fisher.has_value()) {
    EffectiveNoise out;
    out.analytic = true;
    const double f = *channel.fisher;
    if (f <= 0.0) {
      out.value = std::numeric_limits<double>::infinity();
      out.note = "non-informative channel";
    } else {
      out.value = 1.0 / f;
    }
    return out;
  }
  return effective_noise_mc(channel, samples, seed);
}

EffectiveNoise effective_noise_mc(const OutputChannel& channel,
                                  std::uint64_t samples, std::uint64_t seed) {
  require(static_cast<bool>(channel.log_likelihood) &&
              static_cast<bool>(channel.sample),
          "effective_noise_mc: channel incomplete");
  require(samples >= 2, "effective_noise_mc: need at least 2 samples");
  Rng rng(seed);
  // Welford on the squared score.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::uint64_t k = 0; k < samples; ++k) {
    const double w = channel.sample(0.0, rng);
    double sc;
    if (channel.score_at_zero) {
      sc = channel.score_at_zero(w);
    } else {
      sc = (channel.log_likelihood(w, kFdStep) -
            channel.log_likelihood(w, -kFdStep)) /
           (2.0 * kFdStep);
    }
    if (!std::isfinite(sc))
      throw std::domain_error(
          "effective_noise_mc: score not finite at y = 0");
    const double u = sc * sc;
    const double d = u - mean;
    mean += d / static_cast<double>(k + 1);
    m2 += d * (u - mean);
  }
  EffectiveNoise out;
  const double n = static_cast<double>(samples);
  const double se = std::sqrt(m2 / (n - 1.0) / n);
  if (mean <= 0.0) {
    out.value = std::numeric_limits<double>::infinity();
    out.note = "non-informative channel";
    return out;
  }
  out.value = 1.0 / mean;
  out.std_error = se / (mean * mean);
  return out;
}

DiscretePrior community_detection_prior(double rho) {
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument("community_detection_prior: rho outside (0, 1)");
  return DiscretePrior({std::sqrt((1.0 - rho) / rho), -std::sqrt(rho / (1.0 - rho))},
                       {rho, 1.0 - rho});
}

CommunityGraph generate_community_graph(double rho, double p, double mu, int n,
                                        std::uint64_t seed) {
  require(rho > 0.0 && rho < 1.0, "generate_community_graph: rho outside (0, 1)");
  require(p > 0.0 && p < 1.0, "generate_community_graph: p outside (0, 1)");
  require(std::isfinite(mu), "generate_community_graph: mu must be finite");
  require(n >= 2, "generate_community_graph: n must be at least 2");
  const double rn = std::sqrt(static_cast<double>(n));
  const double hi = std::sqrt((1.0 - rho) / rho);
  const double lo = -std::sqrt(rho / (1.0 - rho));
  // The three values p + mu s s' / sqrt(n) can take.
  const double q_small = p + mu * hi * hi / rn;
  const double q_large = p + mu * lo * lo / rn;
  const double q_cross = p + mu * hi * lo / rn;
  for (double q : {q_small, q_large, q_cross})
    if (!(q > 0.0 && q < 1.0))
      throw std::invalid_argument(
          "generate_community_graph: link probability outside (0, 1)");

  CommunityGraph g;
  g.n = n;
  g.rho = rho;
  g.p = p;
  g.mu = mu;
  g.effective_noise = mu == 0.0 ? std::numeric_limits<double>::infinity()
                                : p * (1.0 - p) / (mu * mu);
  Rng rng(seed);
  g.signal.resize(n);
  for (int i = 0; i < n; ++i) g.signal[i] = rng.uniform() < rho ? hi : lo;
  const double scale = mu / rn;
  for (int i = 0; i < n; ++i) {
    const double si = g.signal[i];
    for (int j = i + 1; j < n; ++j) {
      const double q = p + scale * si * g.signal[j];
      if (rng.uniform() < q) g.edges.emplace_back(i, j);
    }
  }
  return g;
}

Instance community_equivalent_instance(const CommunityGraph& graph) {
  require(graph.mu != 0.0,
          "community_equivalent_instance: mu = 0 has no equivalent model");
  const int n = graph.n;
  Instance inst;
  inst.n = n;
  inst.delta = graph.effective_noise;
  inst.signal = graph.signal;
  inst.w = Eigen::MatrixXd::Constant(n, n, -graph.p / graph.mu);
  inst.w.diagonal().setZero();
  const double on = (1.0 - graph.p) / graph.mu;
  for (const auto& [i, j] : graph.edges) {
    inst.w(i, j) = on;
    inst.w(j, i) = on;
  }
  return inst;
}

std::function<Eigen::VectorXd(const Eigen::VectorXd&)> community_score_matvec(
    const CommunityGraph& graph) {
  require(graph.mu != 0.0,
          "community_score_matvec: mu = 0 has no equivalent model");
  const int n = graph.n;
  // Adjacency rows flattened for the sparse product.
  auto offsets = std::make_shared<std::vector<int>>(n + 1, 0);
  auto items = std::make_shared<std::vector<int>>();
  items->reserve(2 * graph.edges.size());
  for (const auto& [i, j] : graph.edges) {
    ++(*offsets)[i + 1];
    ++(*offsets)[j + 1];
  }
  for (int i = 0; i < n; ++i) (*offsets)[i + 1] += (*offsets)[i];
  items->resize(2 * graph.edges.size());
  std::vector<int> cursor(offsets->begin(), offsets->end() - 1);
  for (const auto& [i, j] : graph.edges) {
    (*items)[cursor[i]++] = j;
    (*items)[cursor[j]++] = i;
  }
  const double p = graph.p;
  const double inv = 1.0 / (graph.mu * std::sqrt(static_cast<double>(n)));
  return [offsets, items, p, inv, n](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(n);
    const double total = x.sum();
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = (*offsets)[i]; k < (*offsets)[i + 1]; ++k)
        acc += x[(*items)[k]];
      y[i] = (acc - p * (total - x[i])) * inv;
    }
    return y;
  };
}

void save_edge_list(const CommunityGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_edge_list: cannot open " + path);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "# community graph n=%d rho=%.17g p=%.17g mu=%.17g edges=%zu\n",
                graph.n, graph.rho, graph.p, graph.mu, graph.edges.size());
  out << buf;
  std::snprintf(buf, sizeof buf, "# effective_noise=%.17g\n",
                graph.effective_noise);
  out << buf;
  for (const auto& [i, j] : graph.edges) out << i << ' ' << j << '\n';
  if (!out) throw std::runtime_error("save_edge_list: write failed " + path);
}

}  // namespace rank1
