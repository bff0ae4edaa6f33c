#include "rank1/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rank1/util.hpp"

namespace rank1 {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

std::uint64_t counter_seed(std::uint64_t master, std::uint64_t counter) {
  return split_mix64(master ^ split_mix64(counter + 1));
}

double draw_support(const DiscretePrior& prior, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < prior.size(); ++k) {
    acc += prior.weights()[k];
    if (u < acc) return prior.support()[k];
  }
  return prior.support()[prior.size() - 1];
}

// Walks configurations x_depth..x_{n-1} given the prefix, carrying the
// running log weight.  dot = sum_{i<k} w_ik x_i and sq = sum_{i<k} x_i^2 are
// rebuilt once per node, so a leaf costs O(n) amortized.
struct Enumerator {
  const Eigen::MatrixXd& w;
  const DiscretePrior& prior;
  int n;
  double inv_sn_delta;   // 1 / (sqrt(n) delta)
  double inv_2n_delta;   // 1 / (2 n delta)
  std::vector<double> x;

  template <typename Leaf>
  void walk(int depth, double log_weight, Leaf&& leaf) {
    if (depth == n) {
      leaf(log_weight, x);
      return;
    }
    double dot = 0.0, sq = 0.0;
    for (int i = 0; i < depth; ++i) {
      dot += w(i, depth) * x[i];
      sq += x[i] * x[i];
    }
    for (std::size_t k = 0; k < prior.size(); ++k) {
      const double a = prior.support()[k];
      const double a2 = a * a;
      const double term = prior.log_weights()[k] +
                          a * dot * inv_sn_delta +
                          a2 * w(depth, depth) * inv_sn_delta -
                          (sq * a2 + a2 * a2) * inv_2n_delta;
      x[depth] = a;
      walk(depth + 1, log_weight + term, leaf);
    }
  }
};

}  // namespace

EnumerationResult exact_posterior(const Instance& instance,
                                  const DiscretePrior& prior, int workers) {
  require(!instance.coupling.has_value(),
          "exact_posterior: coupled instances not supported");
  const int n = instance.n;
  require(n >= 1 && instance.w.rows() == n && instance.signal.size() == n,
          "exact_posterior: malformed instance");
  require(instance.delta > 0.0, "exact_posterior: delta must be positive");
  const std::uint64_t nu = prior.size();
  std::uint64_t states = 1;
  for (int i = 0; i < n; ++i) {
    if (states > kMaxEnumerationStates / nu + 1) states = kMaxEnumerationStates + 1;
    else states *= nu;
  }
  require(states <= kMaxEnumerationStates, "exact_posterior: state space too large");

  if (workers <= 0) workers = default_workers();
  // Leading digits form the parallel blocks.
  int prefix = 0;
  std::uint64_t blocks = 1;
  while (prefix < n && blocks < 4ull * static_cast<std::uint64_t>(workers) &&
         blocks * nu <= states) {
    blocks *= nu;
    ++prefix;
  }

  // Pins the block's leading digits (accumulating their pair terms exactly
  // as walk() would), then recurses over the free coordinates.
  auto walk_block = [&](std::uint64_t b, auto&& leaf) {
    Enumerator e{instance.w, prior, n,
                 1.0 / (std::sqrt(static_cast<double>(n)) * instance.delta),
                 1.0 / (2.0 * static_cast<double>(n) * instance.delta),
                 std::vector<double>(n, 0.0)};
    std::vector<std::size_t> digits(prefix);
    std::uint64_t bb = b;
    for (int d = prefix - 1; d >= 0; --d) {
      digits[d] = bb % nu;
      bb /= nu;
    }
    double log_weight = 0.0;
    for (int d = 0; d < prefix; ++d) {
      double dot = 0.0, sq = 0.0;
      for (int i = 0; i < d; ++i) {
        dot += instance.w(i, d) * e.x[i];
        sq += e.x[i] * e.x[i];
      }
      const std::size_t k = digits[d];
      const double a = prior.support()[k];
      const double a2 = a * a;
      log_weight += prior.log_weights()[k] + a * dot * e.inv_sn_delta +
                    a2 * instance.w(d, d) * e.inv_sn_delta -
                    (sq * a2 + a2 * a2) * e.inv_2n_delta;
      e.x[d] = a;
    }
    e.walk(prefix, log_weight, leaf);
  };

  // Pass 1: block-local streaming log-sum-exp of the core weights.
  std::vector<double> block_lse(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    double mx = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    walk_block(b, [&](double lw, const std::vector<double>&) {
      if (lw > mx) {
        sum = sum * clipped_exp(mx - lw) + 1.0;
        mx = lw;
      } else {
        sum += clipped_exp(lw - mx);
      }
    });
    block_lse[b] = mx + std::log(sum);
  }, workers);
  const double lse_core = log_sum_exp(block_lse);

  // Pass 2: normalized moment accumulation, merged in block order.
  std::vector<Eigen::VectorXd> means(blocks);
  std::vector<Eigen::MatrixXd> pairs(blocks);
  std::vector<double> mass(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd pp = Eigen::MatrixXd::Zero(n, n);
    double ms = 0.0;
    walk_block(b, [&](double lw, const std::vector<double>& x) {
      const double wgt = clipped_exp(lw - lse_core);
      ms += wgt;
      for (int i = 0; i < n; ++i) {
        m[i] += wgt * x[i];
        const double wxi = wgt * x[i];
        for (int j = i; j < n; ++j) pp(i, j) += wxi * x[j];
      }
    });
    means[b] = std::move(m);
    pairs[b] = std::move(pp);
    mass[b] = ms;
  }, workers);

  EnumerationResult res;
  res.component_means = Eigen::VectorXd::Zero(n);
  res.pairwise_means = Eigen::MatrixXd::Zero(n, n);
  for (std::uint64_t b = 0; b < blocks; ++b) {
    res.component_means += means[b];
    res.pairwise_means += pairs[b];
    res.posterior_mass += mass[b];
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      res.pairwise_means(j, i) = res.pairwise_means(i, j);

  double w2 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) w2 += instance.w(i, j) * instance.w(i, j);
  res.log_partition = lse_core - w2 / (2.0 * instance.delta);

  const Eigen::VectorXd& s = instance.signal;
  double mse = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d = s[i] * s[j] - res.pairwise_means(i, j);
      mse += d * d;
    }
  res.matrix_se = mse / (static_cast<double>(n) * n);
  res.vector_se = (s - res.component_means).squaredNorm() / n;
  return res;
}

MonteCarloEstimate mc_mmse(const DiscretePrior& prior, double snr,
                           std::uint64_t samples, std::uint64_t seed) {
  require(samples >= 1000, "mc_mmse: need at least 1000 samples");
  require(snr >= 0.0, "mc_mmse: snr must be nonnegative");
  const double sigma2 =
      snr == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / snr;
  const double sigma = snr == 0.0 ? 0.0 : std::sqrt(sigma2);
  constexpr std::uint64_t kChunks = 64;
  const std::uint64_t chunk = (samples + kChunks - 1) / kChunks;
  std::vector<double> sums(kChunks, 0.0), sqs(kChunks, 0.0);
  Rng master(seed);
  std::vector<Rng> streams;
  streams.reserve(kChunks);
  for (std::uint64_t c = 0; c < kChunks; ++c) streams.push_back(master.child(c));
  parallel_for(kChunks, [&](std::size_t c) {
    Rng rng = streams[c];
    const std::uint64_t lo = c * chunk;
    const std::uint64_t hi = std::min(samples, lo + chunk);
    double sum = 0.0, sq = 0.0;
    for (std::uint64_t k = lo; k < hi; ++k) {
      const double s = draw_support(prior, rng);
      const double y = snr == 0.0 ? 0.0 : s + sigma * rng.normal();
      const double err = s - posterior_mean(prior, y, sigma2);
      sum += err * err;
      sq += err * err * err * err;
    }
    sums[c] = sum;
    sqs[c] = sq;
  });
  double sum = 0.0, sq = 0.0;
  for (std::uint64_t c = 0; c < kChunks; ++c) {
    sum += sums[c];
    sq += sqs[c];
  }
  const double nd = static_cast<double>(samples);
  MonteCarloEstimate out;
  out.value = sum / nd;
  const double var = std::max(0.0, sq / nd - out.value * out.value);
  out.std_error = std::sqrt(var / nd);
  return out;
}

NishimoriCheck nishimori_check(const DiscretePrior& prior, int n, double delta,
                               int num_instances, std::uint64_t seed,
                               int workers) {
  require(n >= 2, "nishimori_check: n must be at least 2");
  require(num_instances >= 2, "nishimori_check: need at least 2 instances");
  std::vector<double> lhs(num_instances), rhs(num_instances);
  parallel_for(static_cast<std::size_t>(num_instances), [&](std::size_t k) {
    const Instance inst =
        generate_instance(prior, n, delta, counter_seed(seed, k));
    const EnumerationResult res = exact_posterior(inst, prior, 1);
    double a = 0.0, b = 0.0;
    int cnt = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double m = res.pairwise_means(i, j);
        a += inst.signal[i] * inst.signal[j] * m;
        b += m * m;
        ++cnt;
      }
    lhs[k] = a / cnt;
    rhs[k] = b / cnt;
  }, workers);
  NishimoriCheck out;
  double dsum = 0.0, dsq = 0.0;
  for (int k = 0; k < num_instances; ++k) {
    out.lhs += lhs[k];
    out.rhs += rhs[k];
    const double d = lhs[k] - rhs[k];
    dsum += d;
    dsq += d * d;
  }
  const double kn = num_instances;
  out.lhs /= kn;
  out.rhs /= kn;
  const double var = std::max(0.0, dsq / kn - (dsum / kn) * (dsum / kn));
  out.std_error = std::sqrt(var / kn);
  return out;
}

std::vector<MmseCurvePoint> finite_size_mmse_curve(
    const DiscretePrior& prior, int n, const std::vector<double>& deltas,
    int num_instances, std::uint64_t seed, int workers) {
  require(n >= 2, "finite_size_mmse_curve: n must be at least 2");
  require(num_instances >= 2, "finite_size_mmse_curve: need at least 2 instances");
  require(!deltas.empty(), "finite_size_mmse_curve: empty delta grid");
  std::vector<MmseCurvePoint> curve(deltas.size());
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    require(deltas[d] > 0.0, "finite_size_mmse_curve: delta must be positive");
    std::vector<double> ms(num_instances), vs(num_instances);
    parallel_for(static_cast<std::size_t>(num_instances), [&](std::size_t k) {
      const std::uint64_t counter =
          d * static_cast<std::uint64_t>(num_instances) + k;
      const Instance inst =
          generate_instance(prior, n, deltas[d], counter_seed(seed, counter));
      const EnumerationResult res = exact_posterior(inst, prior, 1);
      ms[k] = res.matrix_se;
      vs[k] = res.vector_se;
    }, workers);
    MmseCurvePoint& pt = curve[d];
    pt.delta = deltas[d];
    double m1 = 0.0, m2 = 0.0, v1 = 0.0, v2 = 0.0;
    for (int k = 0; k < num_instances; ++k) {
      m1 += ms[k];
      m2 += ms[k] * ms[k];
      v1 += vs[k];
      v2 += vs[k] * vs[k];
    }
    const double kn = num_instances;
    pt.matrix_mmse = m1 / kn;
    pt.vector_mmse = v1 / kn;
    pt.matrix_std_error =
        std::sqrt(std::max(0.0, m2 / kn - pt.matrix_mmse * pt.matrix_mmse) / kn);
    pt.vector_std_error =
        std::sqrt(std::max(0.0, v2 / kn - pt.vector_mmse * pt.vector_mmse) / kn);
  }
  return curve;
}

}  // namespace rank1
