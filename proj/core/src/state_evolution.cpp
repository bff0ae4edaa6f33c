#include "rank1/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "rank1/potential.hpp"
#include "rank1/util.hpp"

namespace rank1 {

namespace {

void require_delta(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("noise variance must be positive and finite");
}

// Support shift applied to zero-mean priors before a run: E = v is an exact
// fixed point for them ("the recursion does not start"), and a shift of
// eps = 1e-6 * sqrt(v) perturbs every reported value only at order eps^2.
DiscretePrior run_prior_for(const DiscretePrior& prior) {
  double v = prior.second_moment();
  if (prior.zero_mean() && v > 0.0) return prior.shifted(1e-6 * std::sqrt(v));
  return prior;
}

double clamp_mse(double e, double v, const char* who) {
  if (!std::isfinite(e)) throw std::invalid_argument(std::string(who) + ": E must be finite");
  double slack = 1e-12 * std::max(1.0, v);
  if (e < -slack || e > v + slack)
    throw std::invalid_argument(std::string(who) + ": E outside [0, v]");
  return std::clamp(e, 0.0, v);
}

std::vector<char> seed_mask(int n, const std::vector<int>& seeds, const char* who) {
  std::vector<char> mask(n, 0);
  for (int b : seeds) {
    if (b < 0 || b >= n)
      throw std::invalid_argument(std::string(who) + ": seed index out of range");
    mask[b] = 1;
  }
  return mask;
}

struct CoupledRun {
  std::vector<double> values;
  int iterations = 0;
  bool converged = false;
  bool early_success = false;
};

// Shared synchronous loop for coupled runs.  Per-block mmse calls are
// memoized on the effective snr: blocks ahead of the propagating front and
// converged regions keep an unchanged snr, so most of the ring costs nothing
// per sweep.  success_level, when given, stops the run as soon as every
// non-seed block is at or below it; the iteration is componentwise
// non-increasing, so the condition also holds for the fixed point.
CoupledRun run_coupled(const DiscretePrior& run_prior, double v_run, double v_init,
                       const CouplingMatrix& lambda, const std::vector<char>& mask,
                       double delta, double tol, int max_iter,
                       const QuadratureRule& quad, const double* success_level) {
  int n = lambda.size();
  CoupledRun run;
  run.values.assign(n, v_init);
  for (int mu = 0; mu < n; ++mu)
    if (mask[mu]) run.values[mu] = 0.0;

  std::vector<double> prev_gamma(n, -1.0);
  std::vector<double> prev_val(n, 0.0);
  double prev_change = -1.0;
  for (int t = 1; t <= max_iter; ++t) {
    std::vector<double> g = lambda.apply(run.values);
    double change = 0.0;
    double top = 0.0;
    for (int mu = 0; mu < n; ++mu) {
      if (mask[mu]) continue;
      double gamma = (v_run - g[mu]) / delta;
      if (gamma < 0.0) gamma = 0.0;
      double val;
      if (std::fabs(gamma - prev_gamma[mu]) <= 1e-14 * std::max(1.0, prev_gamma[mu])) {
        val = prev_val[mu];
      } else {
        val = mmse(run_prior, gamma, quad);
        prev_gamma[mu] = gamma;
        prev_val[mu] = val;
      }
      // The exact map is componentwise monotone and starts from the all-v
      // profile, so the sweep can only move down; the guard absorbs
      // quadrature jitter near fixed points.
      if (val > run.values[mu]) val = run.values[mu];
      if (val < 0.0) val = 0.0;
      change = std::max(change, run.values[mu] - val);
      run.values[mu] = val;
      top = std::max(top, val);
    }
    run.iterations = t;
    if (success_level && top <= *success_level) {
      run.early_success = true;
      run.converged = change < tol && change <= prev_change;
      return run;
    }
    // A change below tol only counts once changes stop growing: a biased
    // zero-mean start drifts off the all-v profile through steps far below
    // tol that grow geometrically.
    if (change < tol && change <= prev_change) {
      run.converged = true;
      return run;
    }
    prev_change = change;
  }
  return run;
}

// Potential of a profile on the chain {0..n-1}: the kernel is truncated at
// the ends instead of wrapping.  Used by the shift diagnostic, where only
// differences between profiles that agree near both ends matter, so the
// truncation bias cancels.
double chain_potential(const DiscretePrior& prior, const std::vector<double>& e,
                       const std::vector<double>& coeffs, double v, double delta,
                       const QuadratureRule& quad) {
  int n = static_cast<int>(e.size());
  int w = static_cast<int>(coeffs.size()) - 1;
  double quad_acc = 0.0;
  double t_sum = 0.0;
  std::unordered_map<double, double> memo;
  for (int mu = 0; mu < n; ++mu) {
    double sf = 0.0;  // sum_nu c_|mu-nu| (v - E_nu)
    double se = 0.0;  // sum_nu c_|mu-nu| E_nu
    for (int d = -w; d <= w; ++d) {
      int nu = mu + d;
      if (nu < 0 || nu >= n) continue;
      double c = coeffs[std::abs(d)];
      sf += c * (v - e[nu]);
      se += c * e[nu];
    }
    quad_acc += (v - e[mu]) * sf;
    double gamma = (v - se) / delta;
    if (gamma < 0.0) gamma = 0.0;
    auto it = memo.find(gamma);
    if (it == memo.end())
      it = memo.emplace(gamma, scalar_log_partition(prior, gamma, quad)).first;
    t_sum += it->second;
  }
  return quad_acc / (4.0 * delta) - t_sum;
}

}  // namespace

CouplingMatrix::CouplingMatrix(int length, int window, std::vector<double> coeffs)
    : length_(length), window_(window), coeffs_(std::move(coeffs)) {
  if (length_ < 0 || window_ < 0 || 2 * window_ > length_)
    throw std::invalid_argument("coupling window must satisfy 0 <= w <= L/2");
  if (coeffs_.size() != static_cast<std::size_t>(window_) + 1)
    throw std::invalid_argument("coupling kernel needs one coefficient per distance 0..w");
}

double CouplingMatrix::operator()(int mu, int nu) const {
  int n = size();
  if (mu < 0 || mu >= n || nu < 0 || nu >= n)
    throw std::out_of_range("coupling matrix index out of range");
  int raw = std::abs(mu - nu);
  int d = std::min(raw, n - raw);
  return d <= window_ ? coeffs_[d] : 0.0;
}

std::vector<double> CouplingMatrix::first_row() const {
  std::vector<double> row(size(), 0.0);
  for (int nu = 0; nu < size(); ++nu) row[nu] = (*this)(0, nu);
  return row;
}

std::vector<double> CouplingMatrix::apply(const std::vector<double>& x) const {
  int n = size();
  if (x.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("coupling matrix and vector sizes do not match");
  std::vector<double> y(n, 0.0);
  for (int mu = 0; mu < n; ++mu) {
    double acc = coeffs_[0] * x[mu];
    for (int d = 1; d <= window_; ++d) {
      int up = mu + d < n ? mu + d : mu + d - n;
      int dn = mu - d >= 0 ? mu - d : mu - d + n;
      acc += coeffs_[d] * (x[up] + x[dn]);
    }
    y[mu] = acc;
  }
  return y;
}

CouplingMatrix triangle_coupling(int L, int w) {
  if (L < 0) throw std::invalid_argument("triangle_coupling: L must be nonnegative");
  if (L % 2 != 0) throw std::invalid_argument("triangle_coupling: L must be even");
  if (w < 0 || 2 * w > L)
    throw std::invalid_argument("triangle_coupling: window must satisfy 0 <= w <= L/2");
  std::vector<double> coeffs(w + 1);
  double h = 1.0 / (w + 1);
  for (int d = 0; d <= w; ++d)
    coeffs[d] = h * (1.0 - static_cast<double>(d) / (w + 1));
  // Row sum telescopes: (1 + 2 sum_{d=1..w} (1 - d/(w+1))) / (w+1) = 1.
  double row = coeffs[0];
  for (int d = 1; d <= w; ++d) row += 2.0 * coeffs[d];
  if (std::fabs(row - 1.0) > 1e-12)
    throw std::logic_error("triangle_coupling: row normalization check failed");
  return CouplingMatrix(L, w, std::move(coeffs));
}

std::vector<int> seed_blocks(int L, int w) {
  if (L < 0 || w < 0 || 2 * w > L)
    throw std::invalid_argument("seed_blocks: window must satisfy 0 <= w <= L/2");
  std::vector<int> b;
  for (int mu = 0; mu < w; ++mu) b.push_back(mu);
  for (int mu = L - w; mu <= L; ++mu) b.push_back(mu);
  return b;
}

double se_step(const DiscretePrior& prior, double e, double delta,
               const QuadratureRule& quad) {
  require_delta(delta);
  double v = prior.second_moment();
  e = clamp_mse(e, v, "se_step");
  double gamma = (v - e) / delta;
  if (gamma < 0.0) gamma = 0.0;
  return mmse(prior, gamma, quad);
}

SETrajectory se_run(const DiscretePrior& prior, double delta, double tol,
                    int max_iter, const QuadratureRule& quad) {
  require_delta(delta);
  if (!(tol > 0.0) || !std::isfinite(tol))
    throw std::invalid_argument("se_run: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("se_run: max_iter must be at least 1");

  const DiscretePrior run_prior = run_prior_for(prior);
  const double v = prior.second_moment();
  const double v_run = run_prior.second_moment();

  SETrajectory traj;
  traj.delta = delta;
  double e = v;
  traj.iterates.push_back(e);
  double prev_change = -1.0;
  for (int t = 0; t < max_iter; ++t) {
    double gamma = (v_run - e) / delta;
    if (gamma < 0.0) gamma = 0.0;
    double next = mmse(run_prior, gamma, quad);
    if (next > e) next = e;  // exact map is monotone from E^0 = v; guard jitter
    if (next < 0.0) next = 0.0;
    traj.iterates.push_back(next);
    double change = e - next;
    e = next;
    // Convergence needs the changes to have stopped growing as well: a
    // biased zero-mean start leaves E = v through steps far below tol that
    // grow geometrically before the drop to the informative fixed point.
    if (change < tol && change <= prev_change) {
      traj.converged = true;
      break;
    }
    prev_change = change;
  }
  traj.fixed_point = e;
  return traj;
}

CoupledProfile coupled_se_step(const DiscretePrior& prior,
                               const CoupledProfile& profile,
                               const CouplingMatrix& lambda, double delta,
                               const QuadratureRule& quad) {
  require_delta(delta);
  int n = lambda.size();
  if (profile.values.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("coupled_se_step: profile length does not match the coupling matrix");
  double v = prior.second_moment();
  std::vector<char> mask = seed_mask(n, profile.seed_set, "coupled_se_step");

  std::vector<double> e(n);
  for (int mu = 0; mu < n; ++mu)
    e[mu] = mask[mu] ? 0.0 : clamp_mse(profile.values[mu], v, "coupled_se_step");

  std::vector<double> g = lambda.apply(e);
  CoupledProfile out;
  out.seed_set = profile.seed_set;
  out.values.assign(n, 0.0);
  for (int mu = 0; mu < n; ++mu) {
    if (mask[mu]) continue;
    double gamma = (v - g[mu]) / delta;
    if (gamma < 0.0) gamma = 0.0;
    out.values[mu] = mmse(prior, gamma, quad);
  }
  return out;
}

CoupledSEResult coupled_se_run(const DiscretePrior& prior, int L, int w,
                               double delta, double tol, int max_iter,
                               const QuadratureRule& quad) {
  require_delta(delta);
  if (!(tol > 0.0) || !std::isfinite(tol))
    throw std::invalid_argument("coupled_se_run: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("coupled_se_run: max_iter must be at least 1");

  CouplingMatrix lambda = triangle_coupling(L, w);
  std::vector<int> seeds = seed_blocks(L, w);
  std::vector<char> mask = seed_mask(lambda.size(), seeds, "coupled_se_run");

  const DiscretePrior run_prior = run_prior_for(prior);
  const double v = prior.second_moment();
  const double v_run = run_prior.second_moment();

  CoupledRun run = run_coupled(run_prior, v_run, v, lambda, mask, delta, tol,
                               max_iter, quad, nullptr);
  CoupledSEResult out;
  out.profile.values = std::move(run.values);
  out.profile.seed_set = std::move(seeds);
  out.iterations = run.iterations;
  out.converged = run.converged;
  return out;
}

double coupled_potential(const DiscretePrior& prior, const CoupledProfile& profile,
                         const CouplingMatrix& lambda, double delta,
                         const QuadratureRule& quad) {
  require_delta(delta);
  int n = lambda.size();
  if (profile.values.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("coupled_potential: profile length does not match the coupling matrix");
  double v = prior.second_moment();

  std::vector<double> e(n);
  for (int mu = 0; mu < n; ++mu)
    e[mu] = clamp_mse(profile.values[mu], v, "coupled_potential");

  std::vector<double> ge = lambda.apply(e);
  std::vector<double> f(n);
  for (int mu = 0; mu < n; ++mu) f[mu] = v - e[mu];
  std::vector<double> gf = lambda.apply(f);

  double quad_acc = 0.0;
  for (int mu = 0; mu < n; ++mu) quad_acc += f[mu] * gf[mu];

  // Plateau blocks share an identical effective snr; memoize on it.
  double t_sum = 0.0;
  std::unordered_map<double, double> memo;
  for (int mu = 0; mu < n; ++mu) {
    double gamma = (v - ge[mu]) / delta;
    if (gamma < 0.0) gamma = 0.0;
    auto it = memo.find(gamma);
    if (it == memo.end())
      it = memo.emplace(gamma, scalar_log_partition(prior, gamma, quad)).first;
    t_sum += it->second;
  }
  return quad_acc / (4.0 * delta) - t_sum;
}

ShiftDiagnostic shift_diagnostic(const DiscretePrior& prior, int w, int L,
                                 double delta, const QuadratureRule& quad) {
  ShiftDiagnostic diag;
  CoupledSEResult run = coupled_se_run(prior, L, w, delta, 1e-9, 10000, quad);
  diag.converged = run.converged;
  diag.e_good = good_branch_e(prior, delta, quad);

  const std::vector<double>& e = run.profile.values;
  double v = prior.second_moment();
  int lo = w, hi = L - w - 1;  // interior arc between the two seed runs
  if (lo > hi) throw std::invalid_argument("shift_diagnostic: no interior blocks");

  int mu_max = lo;
  for (int mu = lo; mu <= hi; ++mu)
    if (e[mu] > e[mu_max]) mu_max = mu;
  diag.mu_max = mu_max;
  diag.e_max = e[mu_max];

  if (diag.e_max <= diag.e_good + 1e-9 * std::max(1.0, v)) return diag;  // wave won, nothing to saturate

  int first_above = mu_max;
  for (int mu = lo; mu <= mu_max; ++mu) {
    if (e[mu] > diag.e_good) {
      first_above = mu;
      break;
    }
  }
  diag.mu_inf = first_above - 1;

  // The saturated profile lives on the whole line: constant E_good left of
  // mu_inf and constant e_max right of mu_max.  Padding each side with 2w
  // constant blocks restricts that line profile far enough out that the
  // kernel truncation hits only blocks where saturated and shifted agree,
  // so the truncation cancels exactly in their difference.
  int pad = 2 * w;
  std::vector<double> sat(L + 1 + 2 * pad);
  for (int i = 0; i < static_cast<int>(sat.size()); ++i) {
    int mu = i - pad;
    if (mu <= diag.mu_inf)
      sat[i] = diag.e_good;
    else if (mu < mu_max)
      sat[i] = e[mu];
    else
      sat[i] = diag.e_max;
  }
  std::vector<double> shifted(sat.size());
  shifted[0] = diag.e_good;
  for (std::size_t i = 1; i < sat.size(); ++i) shifted[i] = sat[i - 1];

  std::vector<double> row = triangle_coupling(L, w).first_row();
  std::vector<double> coeffs(row.begin(), row.begin() + w + 1);
  diag.potential_saturated = chain_potential(prior, sat, coeffs, v, delta, quad);
  diag.potential_shifted = chain_potential(prior, shifted, coeffs, v, delta, quad);
  diag.difference = diag.potential_shifted - diag.potential_saturated;
  diag.nontrivial = true;
  return diag;
}

SaturationResult threshold_saturation_experiment(const DiscretePrior& prior, int w,
                                                 int L,
                                                 const std::vector<double>& delta_grid,
                                                 double tol, double refine_rel,
                                                 int max_iter,
                                                 const QuadratureRule& quad) {
  if (delta_grid.empty())
    throw std::invalid_argument("threshold_saturation_experiment: empty grid");
  for (double d : delta_grid) require_delta(d);
  if (!(tol > 0.0) || !(refine_rel > 0.0))
    throw std::invalid_argument("threshold_saturation_experiment: tolerances must be positive");

  CouplingMatrix lambda = triangle_coupling(L, w);
  std::vector<int> seeds = seed_blocks(L, w);
  std::vector<char> mask = seed_mask(lambda.size(), seeds, "threshold_saturation_experiment");
  const DiscretePrior run_prior = run_prior_for(prior);
  const double v = prior.second_moment();
  const double v_run = run_prior.second_moment();

  SaturationResult res;
  res.deltas = delta_grid;
  std::sort(res.deltas.begin(), res.deltas.end());
  int m = static_cast<int>(res.deltas.size());
  res.max_interior.assign(m, 0.0);
  res.succeeded.assign(m, 0);
  res.converged.assign(m, 0);

  // success at delta: every non-seed block of the fixed point is at most
  // E_good(delta) + tol.  The run stops as soon as the current (upper
  // bounding) iterate satisfies this.  No good branch at delta means failure.
  auto evaluate = [&](double delta, double* max_out, bool* conv_out) -> bool {
    double level;
    try {
      level = good_branch_e(prior, delta, quad) + tol;
    } catch (const std::domain_error&) {
      CoupledRun run = run_coupled(run_prior, v_run, v, lambda, mask, delta, 1e-9,
                                   max_iter, quad, nullptr);
      if (max_out)
        *max_out = *std::max_element(run.values.begin(), run.values.end());
      if (conv_out) *conv_out = run.converged;
      return false;
    }
    CoupledRun run = run_coupled(run_prior, v_run, v, lambda, mask, delta, 1e-9,
                                 max_iter, quad, &level);
    double top = 0.0;
    for (int mu = 0; mu < lambda.size(); ++mu)
      if (!mask[mu]) top = std::max(top, run.values[mu]);
    if (max_out) *max_out = top;
    if (conv_out) *conv_out = run.converged;
    return run.early_success || top <= level;
  };

  parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
    double top = 0.0;
    bool conv = false;
    bool ok = evaluate(res.deltas[i], &top, &conv);
    res.max_interior[i] = top;
    res.succeeded[i] = ok ? 1 : 0;
    res.converged[i] = conv ? 1 : 0;
  });

  int prefix = 0;  // number of leading grid successes
  while (prefix < m && res.succeeded[prefix]) ++prefix;

  if (prefix == 0) {
    res.delta_amp_wl = res.deltas.front();
    res.crossing_found = false;
    return res;
  }
  if (prefix == m) {
    res.delta_amp_wl = res.deltas.back();
    res.crossing_found = false;
    return res;
  }

  double lo = res.deltas[prefix - 1];
  double hi = res.deltas[prefix];
  for (int it = 0; it < 40 && hi - lo > refine_rel * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (evaluate(mid, nullptr, nullptr))
      lo = mid;
    else
      hi = mid;
  }
  res.delta_amp_wl = lo;
  res.crossing_found = true;
  return res;
}

bool profile_unimodal(const CoupledProfile& profile, double deadband) {
  int n = static_cast<int>(profile.values.size());
  if (n == 0) return true;
  std::vector<char> mask(n, 0);
  for (int b : profile.seed_set)
    if (b >= 0 && b < n) mask[b] = 1;

  // Walk the non-seed blocks in ring order starting just after a seed block
  // (or index 0 when nothing is seeded) so the arc is traversed contiguously.
  int start = 0;
  for (int mu = 0; mu < n; ++mu) {
    int prev = (mu + n - 1) % n;
    if (!mask[mu] && mask[prev]) {
      start = mu;
      break;
    }
  }
  std::vector<double> arc;
  for (int k = 0; k < n; ++k) {
    int mu = (start + k) % n;
    if (!mask[mu]) arc.push_back(profile.values[mu]);
  }

  bool falling = false;
  for (std::size_t i = 1; i < arc.size(); ++i) {
    double d = arc[i] - arc[i - 1];
    if (d > deadband && falling) return false;  // rises again after a fall
    if (d < -deadband) falling = true;
  }
  return true;
}

}  // namespace rank1
