#include "rank1/amp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rank1/util.hpp"

namespace rank1 {
namespace {

// Fixed internal streams.  AMP initialization noise and the power iteration
// start vector must not depend on anything but these constants, so identical
// instances give bitwise-identical results.
constexpr std::uint64_t kAmpInitSeed = 0x243f6a8885a308d3ull;
constexpr std::uint64_t kSpectralSeed = 0x13198a2e03707344ull;

constexpr int kSpectralMaxSteps = 10000;
constexpr double kSpectralTol = 1e-8;

double draw_support(const DiscretePrior& prior, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  const auto support = prior.support();
  const auto weights = prior.weights();
  for (std::size_t k = 0; k + 1 < support.size(); ++k) {
    acc += weights[k];
    if (u < acc) return support[k];
  }
  return support.back();
}

void check_generate_args(int n, double delta) {
  if (n < 2) throw std::invalid_argument("instance dimension must be at least 2");
  if (!(delta >= 0.0)) throw std::invalid_argument("noise variance must be nonnegative");
}

std::vector<char> pinned_mask(int n, int block_size,
                              const std::vector<int>& seed_blocks) {
  std::vector<char> pinned(static_cast<std::size_t>(n), 0);
  for (int b : seed_blocks) {
    for (int k = 0; k < block_size; ++k) {
      pinned[static_cast<std::size_t>(b) * block_size + k] = 1;
    }
  }
  return pinned;
}

void format_float(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

}  // namespace

Instance generate_instance(const DiscretePrior& prior, int n, double delta,
                           std::uint64_t seed) {
  check_generate_args(n, delta);
  Rng rng(seed);
  Instance inst;
  inst.n = n;
  inst.delta = delta;
  inst.signal.resize(n);
  for (int i = 0; i < n; ++i) inst.signal[i] = draw_support(prior, rng);
  const double inv_root_n = 1.0 / std::sqrt(static_cast<double>(n));
  const double root_delta = std::sqrt(delta);
  inst.w.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double value = inst.signal[i] * inst.signal[j] * inv_root_n +
                           rng.normal() * root_delta;
      inst.w(i, j) = value;
      inst.w(j, i) = value;
    }
  }
  return inst;
}

Instance generate_coupled_instance(const DiscretePrior& prior, int block_size,
                                   int length, int window, double delta,
                                   std::uint64_t seed) {
  if (block_size < 1) throw std::invalid_argument("block size must be positive");
  CouplingMatrix lambda = triangle_coupling(length, window);
  const int blocks = lambda.size();
  const long total = static_cast<long>(block_size) * blocks;
  check_generate_args(static_cast<int>(total), delta);

  Rng rng(seed);
  Instance inst;
  inst.n = static_cast<int>(total);
  inst.delta = delta;
  inst.signal.resize(inst.n);
  for (int i = 0; i < inst.n; ++i) inst.signal[i] = draw_support(prior, rng);

  const double root_delta = std::sqrt(delta);
  const double inv_root_b = 1.0 / std::sqrt(static_cast<double>(block_size));
  inst.w.resize(inst.n, inst.n);
  for (int i = 0; i < inst.n; ++i) {
    const int mu = i / block_size;
    for (int j = i; j < inst.n; ++j) {
      const int nu = j / block_size;
      const double lam = lambda(mu, nu);
      double value = rng.normal() * root_delta;
      if (lam > 0.0) {
        value += inst.signal[i] * inst.signal[j] * std::sqrt(lam) * inv_root_b;
      }
      inst.w(i, j) = value;
      inst.w(j, i) = value;
    }
  }
  inst.coupling = CoupledLayout{block_size, std::move(lambda),
                                seed_blocks(length, window)};
  return inst;
}

AmpState amp_run_operator(const AmpProblem& problem, const DiscretePrior& prior,
                          int max_iter, double tol, double damping,
                          NoiseSchedule schedule, const QuadratureRule* quad) {
  if (problem.n < 2) throw std::invalid_argument("problem dimension must be at least 2");
  if (!(problem.delta > 0.0)) {
    throw std::invalid_argument("amp needs a positive noise variance");
  }
  if (max_iter < 1) throw std::invalid_argument("max_iter must be positive");
  if (!(tol >= 0.0)) throw std::invalid_argument("tol must be nonnegative");
  if (!(damping >= 0.0 && damping < 1.0)) {
    throw std::invalid_argument("damping must lie in [0, 1)");
  }
  if (problem.signal.size() != problem.n) {
    throw std::invalid_argument("signal length does not match the problem");
  }
  const QuadratureRule& rule = quad ? *quad : default_quadrature();

  const int n = problem.n;
  const double v = prior.second_moment();
  const double delta = problem.delta;
  const bool coupled = problem.lambda != nullptr;
  const int blocks = coupled ? problem.lambda->size() : 1;
  const int block_size = coupled ? problem.block_size : n;
  if (coupled && block_size * blocks != n) {
    throw std::invalid_argument("block geometry does not match the dimension");
  }
  const std::vector<char> pinned =
      coupled ? pinned_mask(n, block_size, problem.seed_blocks)
              : std::vector<char>(static_cast<std::size_t>(n), 0);

  AmpState state;
  state.x.resize(n);
  Rng rng(kAmpInitSeed);
  const double spread = 1e-3 * std::sqrt(v);
  const double m = prior.mean();
  for (int i = 0; i < n; ++i) {
    state.x[i] = m + (2.0 * rng.uniform() - 1.0) * spread;
  }
  for (int i = 0; i < n; ++i) {
    if (pinned[i]) state.x[i] = problem.signal[i];
  }
  state.x_prev = Eigen::VectorXd::Zero(n);
  state.mse_trace.push_back(vector_mse(state.x, problem.signal));

  // Deterministic schedule: the SE profile tracking the MSE of the current
  // iterate.  The initialization has per-coordinate MSE Var(S) (the
  // perturbation is O(1e-3) and carries no signal), seed blocks 0.
  std::vector<double> se_profile(static_cast<std::size_t>(blocks),
                                 prior.variance());
  CoupledProfile se_state;
  if (coupled) {
    se_state.seed_set = problem.seed_blocks;
    for (int b : se_state.seed_set) se_profile[static_cast<std::size_t>(b)] = 0.0;
    se_state.values = se_profile;
  }

  // Onsager coefficient per block: kernel-mixed mean posterior variance of
  // the step that produced the current estimate.  Zero before the first
  // step (x_prev is the zero vector anyway).
  std::vector<double> onsager(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> var_mean(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> q(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> snr(static_cast<std::size_t>(blocks), 0.0);
  const double q_floor = 1e-12 * std::max(1.0, v);

  Eigen::VectorXd x_next(n);
  for (int t = 0; t < max_iter; ++t) {
    // Per-block effective overlap q = v - E_t, from the schedule.
    if (schedule == NoiseSchedule::kSeCalibrated) {
      if (coupled) {
        const std::vector<double> mixed = problem.lambda->apply(se_state.values);
        for (int b = 0; b < blocks; ++b) q[b] = v - mixed[b];
      } else {
        q[0] = v - se_profile[0];
      }
    } else {
      std::vector<double> q_hat(static_cast<std::size_t>(blocks), 0.0);
      for (int i = 0; i < n; ++i) {
        q_hat[static_cast<std::size_t>(i / block_size)] += state.x[i] * state.x[i];
      }
      for (double& value : q_hat) value /= block_size;
      if (coupled) {
        q = problem.lambda->apply(q_hat);
      } else {
        q = q_hat;
      }
    }
    double noise_acc = 0.0;
    int noise_count = 0;
    for (int b = 0; b < blocks; ++b) {
      const double qb = std::max(q[static_cast<std::size_t>(b)], q_floor);
      q[static_cast<std::size_t>(b)] = qb;
      snr[static_cast<std::size_t>(b)] = qb / delta;
      if (!coupled || !std::binary_search(se_state.seed_set.begin(),
                                          se_state.seed_set.end(), b)) {
        noise_acc += delta / qb;
        ++noise_count;
      }
    }
    state.effective_noise.push_back(noise_acc / std::max(noise_count, 1));

    const Eigen::VectorXd y = problem.score_matvec(state.x);
    if (y.size() != n) throw std::logic_error("score_matvec changed the dimension");

    std::fill(var_mean.begin(), var_mean.end(), 0.0);
    bool finite = true;
    for (int i = 0; i < n; ++i) {
      if (pinned[i]) {
        x_next[i] = problem.signal[i];
        continue;
      }
      const int b = i / block_size;
      const double field =
          (y[i] - onsager[static_cast<std::size_t>(b)] * state.x_prev[i]) / delta;
      const PosteriorMoments pm =
          posterior_moments_field(prior, field, snr[static_cast<std::size_t>(b)]);
      x_next[i] = pm.mean;
      var_mean[static_cast<std::size_t>(b)] += pm.variance;
      if (!std::isfinite(x_next[i])) finite = false;
    }
    for (double& value : var_mean) value /= block_size;

    if (damping > 0.0) x_next = (1.0 - damping) * x_next + damping * state.x;
    const double change = (x_next - state.x).lpNorm<Eigen::Infinity>();

    state.x_prev = state.x;
    state.x = x_next;
    state.iterations = t + 1;
    state.mse_trace.push_back(vector_mse(state.x, problem.signal));
    if (!finite) {
      state.diverged = true;
      break;
    }

    if (coupled) {
      onsager = problem.lambda->apply(var_mean);
      if (schedule == NoiseSchedule::kSeCalibrated) {
        se_state = coupled_se_step(prior, se_state, *problem.lambda, delta, rule);
      }
    } else {
      onsager[0] = var_mean[0];
      if (schedule == NoiseSchedule::kSeCalibrated) {
        se_profile[0] = mmse(prior, snr[0], rule);
      }
    }

    if (change < tol) {
      state.converged = true;
      break;
    }
  }
  return state;
}

AmpState amp_run(const Instance& instance, const DiscretePrior& prior,
                 int max_iter, double tol, double damping,
                 NoiseSchedule schedule, const QuadratureRule* quad) {
  if (instance.w.rows() != instance.n || instance.w.cols() != instance.n ||
      instance.signal.size() != instance.n) {
    throw std::invalid_argument("instance fields are inconsistent");
  }
  // Compatibility check: every signal entry must sit on the prior support.
  const auto support = prior.support();
  for (int i = 0; i < instance.n; ++i) {
    const double s = instance.signal[i];
    bool found = false;
    for (double a : support) {
      if (std::abs(s - a) <= 1e-12 * std::max(1.0, std::abs(a))) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument("signal entries outside the prior support");
    }
  }

  AmpProblem problem;
  problem.n = instance.n;
  problem.delta = instance.delta;
  problem.signal = instance.signal;

  Eigen::MatrixXd scaled;  // coupled only; keep alive across the run
  if (instance.coupling.has_value()) {
    const CoupledLayout& layout = *instance.coupling;
    problem.lambda = &layout.lambda;
    problem.block_size = layout.block_size;
    problem.seed_blocks = layout.seed_blocks;
    scaled.resize(instance.n, instance.n);
    for (int i = 0; i < instance.n; ++i) {
      const int mu = i / layout.block_size;
      for (int j = 0; j < instance.n; ++j) {
        const int nu = j / layout.block_size;
        const double lam = layout.lambda(mu, nu);
        scaled(i, j) = lam > 0.0 ? instance.w(i, j) * std::sqrt(lam) : 0.0;
      }
    }
    const double inv_root_b =
        1.0 / std::sqrt(static_cast<double>(layout.block_size));
    problem.score_matvec = [&scaled, inv_root_b](const Eigen::VectorXd& x) {
      return Eigen::VectorXd((scaled * x) * inv_root_b);
    };
  } else {
    const double inv_root_n = 1.0 / std::sqrt(static_cast<double>(instance.n));
    problem.score_matvec = [&instance, inv_root_n](const Eigen::VectorXd& x) {
      return Eigen::VectorXd((instance.w * x) * inv_root_n);
    };
  }
  return amp_run_operator(problem, prior, max_iter, tol, damping, schedule, quad);
}

SpectralResult spectral_estimate_operator(
    int n, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& matvec,
    const Eigen::VectorXd& signal) {
  if (n < 2) throw std::invalid_argument("instance dimension must be at least 2");
  if (signal.size() != n) throw std::invalid_argument("signal length mismatch");

  Rng rng(kSpectralSeed);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = rng.normal();
  b.normalize();

  SpectralResult result;
  // Iterate M^2 so a dominant negative eigenvalue converges too; M^2 is
  // positive semidefinite, so no sign alignment is needed between steps.
  for (int step = 1; step <= kSpectralMaxSteps; ++step) {
    Eigen::VectorXd z = matvec(matvec(b));
    const double norm = z.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) break;  // stuck in the kernel
    z /= norm;
    const double diff = (z - b).norm();
    b = z;
    result.iterations = step;
    if (diff <= kSpectralTol) {
      result.converged = true;
      break;
    }
  }

  result.eigenvalue = b.dot(matvec(b));
  const double signal_norm = signal.norm();
  result.overlap = signal_norm > 0.0 ? std::abs(b.dot(signal)) / signal_norm : 0.0;
  result.estimate = b * signal_norm;
  return result;
}

SpectralResult spectral_estimate(const Instance& instance) {
  const double inv_root_n = 1.0 / std::sqrt(static_cast<double>(instance.n));
  return spectral_estimate_operator(
      instance.n,
      [&instance, inv_root_n](const Eigen::VectorXd& x) {
        return Eigen::VectorXd((instance.w * x) * inv_root_n);
      },
      instance.signal);
}

double matrix_mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& signal) {
  if (estimate.size() != signal.size()) {
    throw std::invalid_argument("estimate and signal lengths differ");
  }
  const double n = static_cast<double>(signal.size());
  const double ss = signal.squaredNorm();
  const double xx = estimate.squaredNorm();
  const double sx = signal.dot(estimate);
  return (ss * ss - 2.0 * sx * sx + xx * xx) / (n * n);
}

double vector_mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& signal) {
  if (estimate.size() != signal.size()) {
    throw std::invalid_argument("estimate and signal lengths differ");
  }
  return (estimate - signal).squaredNorm() / static_cast<double>(signal.size());
}

void save_instance(const Instance& instance, const std::string& path) {
  std::string out;
  out.reserve(static_cast<std::size_t>(instance.n) * (instance.n + 3) * 10);
  out += "n,";
  out += std::to_string(instance.n);
  out += "\ndelta,";
  format_float(out, instance.delta);
  out += "\ncoupled,";
  out += instance.coupling.has_value() ? '1' : '0';
  out += '\n';
  if (instance.coupling.has_value()) {
    const CoupledLayout& layout = *instance.coupling;
    out += "geometry,";
    out += std::to_string(layout.block_size);
    out += ',';
    out += std::to_string(layout.lambda.length());
    out += ',';
    out += std::to_string(layout.lambda.window());
    out += '\n';
  }
  out += "signal";
  for (int i = 0; i < instance.n; ++i) {
    out += ',';
    format_float(out, instance.signal[i]);
  }
  out += '\n';
  for (int i = 0; i < instance.n; ++i) {
    out += 'w';
    for (int j = i; j < instance.n; ++j) {
      out += ',';
      format_float(out, instance.w(i, j));
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  file << out;
  if (!file) throw std::runtime_error("write to " + path + " failed");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(line.substr(start));
      break;
    }
    parts.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return parts;
}

double parse_float(const std::string& text) {
  std::size_t used = 0;
  const double value = std::stod(text, &used);
  if (used != text.size()) throw std::runtime_error("bad float field: " + text);
  return value;
}

}  // namespace

Instance load_instance(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path);
  std::string line;
  auto next = [&](const char* tag) {
    if (!std::getline(file, line)) {
      throw std::runtime_error(std::string("truncated instance file before ") + tag);
    }
    std::vector<std::string> parts = split_line(line);
    if (parts.empty() || parts[0] != tag) {
      throw std::runtime_error(std::string("expected line tag ") + tag);
    }
    return parts;
  };

  Instance inst;
  inst.n = static_cast<int>(parse_float(next("n").at(1)));
  inst.delta = parse_float(next("delta").at(1));
  const bool coupled = next("coupled").at(1) == "1";
  int block_size = 0, length = 0, window = 0;
  if (coupled) {
    const auto parts = next("geometry");
    block_size = static_cast<int>(parse_float(parts.at(1)));
    length = static_cast<int>(parse_float(parts.at(2)));
    window = static_cast<int>(parse_float(parts.at(3)));
  }
  const auto signal_parts = next("signal");
  if (static_cast<int>(signal_parts.size()) != inst.n + 1) {
    throw std::runtime_error("signal length does not match n");
  }
  inst.signal.resize(inst.n);
  for (int i = 0; i < inst.n; ++i) inst.signal[i] = parse_float(signal_parts[i + 1]);
  inst.w.resize(inst.n, inst.n);
  for (int i = 0; i < inst.n; ++i) {
    const auto parts = next("w");
    if (static_cast<int>(parts.size()) != inst.n - i + 1) {
      throw std::runtime_error("matrix row has the wrong length");
    }
    for (int j = i; j < inst.n; ++j) {
      const double value = parse_float(parts[j - i + 1]);
      inst.w(i, j) = value;
      inst.w(j, i) = value;
    }
  }
  if (coupled) {
    inst.coupling = CoupledLayout{block_size, triangle_coupling(length, window),
                                  seed_blocks(length, window)};
  }
  return inst;
}

}  // namespace rank1
