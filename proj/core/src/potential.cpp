#include "rank1/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "rank1/util.hpp"

namespace rank1 {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_delta(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("delta must be positive and finite");
}

void require_signal(const DiscretePrior& prior) {
  if (prior.second_moment() <= 0.0)
    throw std::invalid_argument("prior carries no signal (second moment is zero)");
}

// Fixed points E of state evolution at noise delta are exactly the solutions
// of delta(s) = (v - mmse(s))/s with E = mmse(s), s = (v - E)/delta.  The
// interior extrema of delta(s) are the spinodals: below the local minimum the
// high-E branch is gone, above the local maximum the low-E branch is gone.
// Parametrizing by s instead of E keeps merging roots resolvable: near a fold
// the curve is an analytic parabola in log s, no matter how close the two
// E-roots are.
struct SnrCurve {
  const DiscretePrior* prior = nullptr;
  const QuadratureRule* quad = nullptr;
  double v = 0.0;
  std::vector<double> s;
  std::vector<double> d;
  struct Extremum {
    double s = 0.0;
    double d = 0.0;
    bool is_max = false;
  };
  std::vector<Extremum> ext;  // refined interior extrema, increasing s

  // (v - mmse(s))/s, computed through E[posterior_mean^2] = v - mmse so the
  // numerator never suffers cancellation as s -> 0.
  double delta_of(double snr) const {
    return estimator_second_moment(*prior, snr, *quad) / snr;
  }
  std::vector<double> solve(double delta) const;
  const Extremum* local_min() const;
  const Extremum* local_max() const;
};

const SnrCurve::Extremum* SnrCurve::local_min() const {
  for (const auto& e : ext)
    if (!e.is_max) return &e;
  return nullptr;
}

const SnrCurve::Extremum* SnrCurve::local_max() const {
  for (const auto& e : ext)
    if (e.is_max) return &e;
  return nullptr;
}

// Golden-section search for an extremum of delta(s) in log s on [lo, hi].
SnrCurve::Extremum refine_extremum(const SnrCurve& c, double lo, double hi, bool is_max) {
  double a = std::log(lo), b = std::log(hi);
  const double phi = 0.6180339887498949;
  auto val = [&](double x) {
    double dd = c.delta_of(std::exp(x));
    return is_max ? dd : -dd;
  };
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = val(x1), f2 = val(x2);
  for (int it = 0; it < 70; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = val(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = val(x1);
    }
  }
  double sx = std::exp(0.5 * (a + b));
  return {sx, c.delta_of(sx), is_max};
}

SnrCurve build_curve(const DiscretePrior& prior, const QuadratureRule& quad) {
  require_signal(prior);
  SnrCurve c;
  c.prior = &prior;
  c.quad = &quad;
  c.v = prior.second_moment();

  // Covers delta(s) from far above the search bracket (m^2/s term or the
  // s -> 0 limit v^2) down to 1e-7 v^2 at the high end.
  const int n = 8192;
  double s_lo = 1e-11 / c.v, s_hi = 1e7 / c.v;
  double step = std::log(s_hi / s_lo) / (n - 1);
  c.s.resize(n);
  c.d.resize(n);
  for (int i = 0; i < n; ++i) {
    c.s[i] = s_lo * std::exp(step * i);
    c.d[i] = c.delta_of(c.s[i]);
  }

  for (int i = 1; i + 1 < n; ++i) {
    bool mx = c.d[i] > c.d[i - 1] && c.d[i] >= c.d[i + 1];
    bool mn = c.d[i] < c.d[i - 1] && c.d[i] <= c.d[i + 1];
    if (mx || mn) c.ext.push_back(refine_extremum(c, c.s[i - 1], c.s[i + 1], mx));
  }

  // Sampling noise on flat stretches (roundoff at the 1e-10 relative level)
  // shows up as low-prominence extremum floods.  Three cleanup rules, applied
  // until stable: merge adjacent same-kind extrema, annihilate adjacent
  // min/max pairs closer than the prominence floor, and drop any extremum
  // that fails to rise or fall by the floor against both flanking nodes
  // (neighboring extrema or the curve ends).
  double prom = 1e-9 * c.v * c.v;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i + 1 < c.ext.size() && !changed; ++i) {
      if (c.ext[i].is_max == c.ext[i + 1].is_max) {
        bool keep_second = c.ext[i].is_max ? (c.ext[i + 1].d > c.ext[i].d)
                                           : (c.ext[i + 1].d < c.ext[i].d);
        c.ext.erase(c.ext.begin() + (keep_second ? i : i + 1));
        changed = true;
      } else if (std::abs(c.ext[i].d - c.ext[i + 1].d) < prom) {
        c.ext.erase(c.ext.begin() + i, c.ext.begin() + i + 2);
        changed = true;
      }
    }
    for (std::size_t i = 0; i < c.ext.size() && !changed; ++i) {
      double left = (i == 0) ? c.d.front() : c.ext[i - 1].d;
      double right = (i + 1 == c.ext.size()) ? c.d.back() : c.ext[i + 1].d;
      double sign = c.ext[i].is_max ? 1.0 : -1.0;
      double rise = std::min(sign * (c.ext[i].d - left), sign * (c.ext[i].d - right));
      if (rise < prom) {
        c.ext.erase(c.ext.begin() + i);
        changed = true;
      }
    }
  }

  if (c.ext.size() > 2) {
    std::vector<double> roots;
    for (const auto& e : c.ext) roots.push_back(mmse(prior, e.s, quad));
    throw HypothesisViolation(
        "potential hypothesis violated: fixed-point curve has more than one fold", roots);
  }
  return c;
}

double bisect_segment(const SnrCurve& c, double sl, double sr, double dl, double dr,
                      double target) {
  bool desc = dl > dr;
  for (int it = 0; it < 200 && sr > sl * (1.0 + 1e-13); ++it) {
    double sm = std::sqrt(sl * sr);
    double dm = c.delta_of(sm);
    if (desc ? (dm > target) : (dm < target))
      sl = sm;
    else
      sr = sm;
  }
  return std::sqrt(sl * sr);
}

std::vector<double> SnrCurve::solve(double delta) const {
  std::vector<std::pair<double, double>> nodes;
  nodes.emplace_back(s.front(), d.front());
  for (const auto& e : ext) nodes.emplace_back(e.s, e.d);
  nodes.emplace_back(s.back(), d.back());
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    auto [sl, dl] = nodes[i];
    auto [sr, dr] = nodes[i + 1];
    if ((dl - delta) * (dr - delta) < 0.0)
      roots.push_back(bisect_segment(*this, sl, sr, dl, dr, delta));
  }
  return roots;
}

// g(E) = E - mmse((v-E)/delta); stationary points of i_rs are its roots and
// di_rs/dE = g(E)/(2 delta), so the bracket signs classify each root.
double g_of(const DiscretePrior& prior, const QuadratureRule& quad, double v, double delta,
            double e) {
  return e - mmse(prior, (v - e) / delta, quad);
}

StationaryKind kind_from_signs(int left, int right) {
  if (left < 0 && right > 0) return StationaryKind::minimum;
  if (left > 0 && right < 0) return StationaryKind::maximum;
  return StationaryKind::inflexion;
}

// Converge a curve-located branch value to the mmse fixed point it
// approximates, so branch E values agree with state-evolution iterates to
// machine precision rather than to curve accuracy.  Stable branches contract;
// the iteration cap guards the marginal case at a spinodal.
double polish_fixed_point(const DiscretePrior& prior, const QuadratureRule& quad, double v,
                          double delta, double e) {
  for (int it = 0; it < 500; ++it) {
    double next = mmse(prior, (v - e) / delta, quad);
    if (std::abs(next - e) <= 1e-13 * std::max(1.0, v)) return next;
    e = next;
  }
  return e;
}

}  // namespace

HypothesisViolation::HypothesisViolation(const std::string& what, std::vector<double> roots)
    : std::runtime_error(what), roots_(std::move(roots)) {}

const StationaryPoint& StationaryPoints::global_minimum() const {
  if (points.empty())
    throw std::logic_error("internal error: no stationary point located");
  const StationaryPoint* best = &points.front();
  for (const auto& p : points)
    if (p.potential < best->potential) best = &p;
  return *best;
}

double scalar_log_partition(const DiscretePrior& prior, double gamma,
                            const QuadratureRule& quad) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("gamma must be finite and >= 0");
  if (gamma == 0.0) return 0.0;
  auto a = prior.support();
  auto p = prior.weights();
  auto lw = prior.log_weights();
  double root = std::sqrt(gamma);
  std::vector<double> terms(a.size());
  double acc = 0.0;
  for (std::size_t sidx = 0; sidx < a.size(); ++sidx) {
    double inner = 0.0;
    for (std::size_t k = 0; k < quad.nodes.size(); ++k) {
      double h = gamma * a[sidx] + root * quad.nodes[k];
      for (std::size_t b = 0; b < a.size(); ++b)
        terms[b] = lw[b] + a[b] * h - 0.5 * a[b] * a[b] * gamma;
      inner += quad.weights[k] * log_sum_exp(terms);
    }
    acc += p[sidx] * inner;
  }
  return acc;
}

double i_rs(const DiscretePrior& prior, double e, double delta, const QuadratureRule& quad) {
  require_delta(delta);
  double v = prior.second_moment();
  if (!(e >= -1e-12 * std::max(1.0, v)) || !(e <= v * (1.0 + 1e-12) + 1e-300))
    throw std::invalid_argument("E must lie in [0, v]");
  e = std::clamp(e, 0.0, v);
  double gamma = (v - e) / delta;
  return ((v - e) * (v - e) + v * v) / (4.0 * delta) - scalar_log_partition(prior, gamma, quad);
}

StationaryPoints stationary_points(const DiscretePrior& prior, double delta,
                                   const QuadratureRule& quad, double tol) {
  require_delta(delta);
  double v = prior.second_moment();
  StationaryPoints out;
  out.delta = delta;
  double scale = std::max(1.0, v);
  double eps = tol * scale;

  if (v <= 0.0) {  // single-atom prior at zero: the potential is identically 0
    out.points.push_back({0.0, 0.0, StationaryKind::minimum, Branch::none});
    return out;
  }

  auto g = [&](double e) { return g_of(prior, quad, v, delta, e); };

  const int n = 4096;
  std::vector<double> ge(n + 1);
  for (int i = 0; i <= n; ++i) ge[i] = g(v * i / n);

  std::vector<std::pair<double, StationaryKind>> roots;

  // Endpoint E = 0 is stationary only when mmse(v/delta) vanishes (Dirac
  // prior, or noise so small the posterior is deterministic).
  if (std::abs(ge[0]) <= eps) {
    double right = g(std::min(v, 2.0 * eps + v / n));
    roots.emplace_back(0.0, right > 0.0 ? StationaryKind::minimum : StationaryKind::inflexion);
  }

  // Sign-change cells, refined x8 and then bisected.
  for (int i = 0; i < n; ++i) {
    double gl = ge[i], gr = ge[i + 1];
    if (!(gl < 0.0) && !(gl > 0.0)) continue;  // exact zero handled by dedupe below
    if (gl * gr >= 0.0) continue;
    double el = v * i / n, er = v * (i + 1) / n;
    double step = (er - el) / 8.0;
    double cl = el, cgl = gl;
    for (int k = 1; k <= 8; ++k) {
      double ex = (k == 8) ? er : el + step * k;
      double gx = (k == 8) ? gr : g(ex);
      if (cgl * gx <= 0.0) {
        el = cl;
        gl = cgl;
        er = ex;
        gr = gx;
        break;
      }
      cl = ex;
      cgl = gx;
    }
    while (er - el > eps) {
      double em = 0.5 * (el + er);
      double gm = g(em);
      if (gl * gm <= 0.0) {
        er = em;
        gr = gm;
      } else {
        el = em;
        gl = gm;
      }
    }
    int left_sign = ge[i] > 0.0 ? 1 : -1;
    int right_sign = ge[i + 1] > 0.0 ? 1 : -1;
    roots.emplace_back(0.5 * (el + er), kind_from_signs(left_sign, right_sign));
  }

  // Endpoint E = v: stationary exactly when the prior has zero mean, since
  // g(v) = v - Var(S) = mean^2.  A sign probe just inside classifies it:
  // increasing into v makes the endpoint a maximum.
  if (prior.zero_mean()) {
    double left = g(v * (1.0 - 1e-7));
    roots.emplace_back(v, left < 0.0 ? StationaryKind::minimum : StationaryKind::maximum);
  }

  std::sort(roots.begin(), roots.end());
  std::vector<std::pair<double, StationaryKind>> dedup;
  for (const auto& r : roots) {
    if (!dedup.empty() && r.first - dedup.back().first <= 2.0 * std::max(eps, v * 1e-12))
      continue;
    dedup.push_back(r);
  }

  if (dedup.size() > 3) {
    std::vector<double> all;
    for (const auto& r : dedup) all.push_back(r.first);
    throw HypothesisViolation(
        "potential hypothesis violated: more than three stationary points", all);
  }
  if (dedup.empty())
    throw std::logic_error("internal error: no stationary point located");

  for (const auto& [e, kind] : dedup)
    out.points.push_back({e, i_rs(prior, e, delta, quad), kind, Branch::none});
  if (out.points.size() == 3) {
    out.points[0].branch = Branch::good;
    out.points[1].branch = Branch::unstable;
    out.points[2].branch = Branch::bad;
  }
  return out;
}

MutualInfo mutual_information(const DiscretePrior& prior, double delta,
                              const QuadratureRule& quad) {
  auto sp = stationary_points(prior, delta, quad);
  double v = prior.second_moment();
  MutualInfo best{i_rs(prior, 0.0, delta, quad), 0.0};
  double at_v = i_rs(prior, v, delta, quad);
  if (at_v < best.value) best = {at_v, v};
  for (const auto& p : sp.points)
    if (p.potential < best.value) best = {p.potential, p.e};
  return best;
}

MatrixMmse matrix_mmse(const DiscretePrior& prior, double delta, const QuadratureRule& quad) {
  auto sp = stationary_points(prior, delta, quad);
  double v = prior.second_moment();
  std::vector<const StationaryPoint*> minima;
  for (const auto& p : sp.points)
    if (p.kind == StationaryKind::minimum) minima.push_back(&p);
  // Endpoints can only minimize when they are stationary, in which case they
  // already appear among the points; the generic fallback is the global min.
  const StationaryPoint* lead = nullptr;
  for (const auto* m : minima)
    if (!lead || m->potential < lead->potential) lead = m;
  if (!lead) lead = &sp.global_minimum();

  auto value_at = [&](double e) { return v * v - (v - e) * (v - e); };
  MatrixMmse out;
  out.value = value_at(lead->e);
  out.low = out.high = out.value;
  for (const auto* m : minima) {
    if (m == lead) continue;
    double gap = std::abs(m->potential - lead->potential);
    if (gap <= 1e-9 * std::max(1.0, std::abs(lead->potential))) {
      out.ambiguous = true;
      out.low = std::min(out.value, value_at(m->e));
      out.high = std::max(out.value, value_at(m->e));
      out.value = out.low;  // the limit from below, where the good branch wins
    }
  }
  return out;
}

VectorMmse vector_mmse(const DiscretePrior& prior, double delta, const Thresholds& thresholds,
                       const QuadratureRule& quad) {
  VectorMmse out;
  out.value = mutual_information(prior, delta, quad).argmin_e;
  out.proven = !(delta >= thresholds.delta_amp && delta <= thresholds.delta_rs);
  return out;
}

VectorMmse vector_mmse(const DiscretePrior& prior, double delta, const QuadratureRule& quad) {
  return vector_mmse(prior, delta, compute_thresholds(prior, quad), quad);
}

double find_delta_amp(const DiscretePrior& prior, double lo, double hi,
                      const QuadratureRule& quad) {
  require_signal(prior);
  double v = prior.second_moment();
  if (lo <= 0.0) lo = 1e-6 * v * v;
  if (hi <= 0.0) hi = 1e3 * v * v;
  if (!(lo < hi)) throw std::invalid_argument("invalid search interval");

  if (prior.zero_mean()) {
    // E = v is stationary for every delta; the transition is the loss of its
    // stability at delta = v^2 (from mmse'(0) = -Var^2), which root counting
    // cannot see.  A support bias regularizes the curve; it must reproduce
    // the boundary within O(eps), checked across two eps values.
    double boundary = v * v;
    double scale = std::sqrt(v);
    bool genuine_fold = true;
    double fold_val = 0.0, prev = 0.0;
    for (double eps : {1e-6 * scale, 1e-7 * scale}) {
      SnrCurve c = build_curve(prior.shifted(eps), quad);
      const auto* mn = c.local_min();
      double val = mn ? mn->d : boundary;
      if (!mn || val > boundary * (1.0 - 1e-4)) genuine_fold = false;
      prev = fold_val;
      fold_val = val;
    }
    if (genuine_fold && std::abs(fold_val - prev) <= 1e-3 * fold_val)
      boundary = fold_val;
    return (boundary >= lo && boundary <= hi) ? boundary : kInf;
  }

  SnrCurve c = build_curve(prior, quad);
  const auto* mn = c.local_min();
  if (!mn) return kInf;  // unique fixed point everywhere: no transition detected
  if (mn->d < lo || mn->d > hi) return kInf;

  // Polish by bisection on the stationary-point count to relative 1e-6.
  double dlo = std::max(lo, mn->d * (1.0 - 1e-3));
  double dhi = std::min(hi, mn->d * (1.0 + 1e-3));
  std::size_t clo = c.solve(dlo).size();
  std::size_t chi = c.solve(dhi).size();
  if (clo == chi) return mn->d;  // fold narrower than the polish window
  while (dhi - dlo > 1e-7 * dhi) {
    double mid = 0.5 * (dlo + dhi);
    if (c.solve(mid).size() == clo)
      dlo = mid;
    else
      dhi = mid;
  }
  return 0.5 * (dlo + dhi);
}

double find_delta_rs(const DiscretePrior& prior, const QuadratureRule& quad) {
  require_signal(prior);
  double v = prior.second_moment();
  SnrCurve c = build_curve(prior, quad);
  const auto* mx = c.local_max();

  bool zm = prior.zero_mean();
  double spin_lo, spin_hi;
  if (zm) {
    // The bad branch is the endpoint E = v with i_rs = v^2/(4 delta) exactly.
    if (!mx || mx->d <= v * v) return v * v;  // higher-order transition point
    spin_lo = v * v;
    spin_hi = mx->d;
  } else {
    const auto* mn = c.local_min();
    if (!mn || !mx) return kInf;  // min i_rs analytic in delta
    spin_lo = mn->d;
    spin_hi = mx->d;
  }

  auto psi = [&](double delta) {
    auto roots = c.solve(delta);
    if (roots.empty()) throw std::logic_error("internal error: branch lost inside fold");
    double e_good = polish_fixed_point(prior, quad, v, delta, mmse(prior, roots.back(), quad));
    double i_good = i_rs(prior, e_good, delta, quad);
    double i_bad = zm ? v * v / (4.0 * delta)
                      : i_rs(prior,
                             polish_fixed_point(prior, quad, v, delta,
                                                mmse(prior, roots.front(), quad)),
                             delta, quad);
    return i_good - i_bad;
  };

  double lo = spin_lo * (1.0 + 1e-9), hi = spin_hi * (1.0 - 1e-9);
  if (psi(lo) >= 0.0) return spin_lo;
  if (psi(hi) <= 0.0) return spin_hi;
  while (hi - lo > 1e-9 * hi) {
    double mid = 0.5 * (lo + hi);
    (psi(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Thresholds compute_thresholds(const DiscretePrior& prior, const QuadratureRule& quad) {
  Thresholds t;
  double v = prior.second_moment();
  t.delta_spectral = v * v;
  t.delta_amp = find_delta_amp(prior, 0.0, 0.0, quad);
  t.delta_rs = find_delta_rs(prior, quad);
  t.delta_opt = t.delta_rs;
  if (!std::isfinite(t.delta_rs))
    t.order = TransitionOrder::none;
  else if (std::isfinite(t.delta_amp) && t.delta_rs > t.delta_amp * (1.0 + 1e-9))
    t.order = TransitionOrder::first_order;
  else
    t.order = TransitionOrder::higher_order;
  return t;
}

double first_order_boundary(const std::function<DiscretePrior(double)>& family, double rho_lo,
                            double rho_hi, double rho_tol, double gap_rel,
                            const QuadratureRule& quad) {
  if (!(rho_lo < rho_hi) || !(rho_tol > 0.0))
    throw std::invalid_argument("invalid boundary search parameters");
  auto first_order = [&](double rho) {
    Thresholds t = compute_thresholds(family(rho), quad);
    return std::isfinite(t.delta_amp) && std::isfinite(t.delta_rs) &&
           t.delta_rs - t.delta_amp > gap_rel * t.delta_amp;
  };
  bool flo = first_order(rho_lo);
  if (flo == first_order(rho_hi))
    throw std::invalid_argument("interval does not bracket the first-order boundary");
  while (rho_hi - rho_lo > rho_tol) {
    double mid = 0.5 * (rho_lo + rho_hi);
    (first_order(mid) == flo ? rho_lo : rho_hi) = mid;
  }
  return 0.5 * (rho_lo + rho_hi);
}

double good_branch_e(const DiscretePrior& prior, double delta, const QuadratureRule& quad) {
  require_delta(delta);
  SnrCurve c = build_curve(prior, quad);
  const auto* mx = c.local_max();
  if (mx && delta > mx->d)
    throw std::domain_error("good branch does not exist at this delta");
  auto roots = c.solve(delta);
  if (roots.empty())
    throw std::domain_error("good branch does not exist at this delta");
  double v = prior.second_moment();
  return polish_fixed_point(prior, quad, v, delta, mmse(prior, roots.back(), quad));
}

double bad_branch_e(const DiscretePrior& prior, double delta, const QuadratureRule& quad) {
  require_delta(delta);
  double v = prior.second_moment();
  if (prior.zero_mean()) {
    if (delta >= v * v) return v;
    throw std::domain_error("bad branch does not exist below the stability boundary");
  }
  SnrCurve c = build_curve(prior, quad);
  const auto* mn = c.local_min();
  if (!mn || delta < mn->d)
    throw std::domain_error("bad branch does not exist at this delta");
  auto roots = c.solve(delta);
  if (roots.empty()) throw std::domain_error("bad branch does not exist at this delta");
  return polish_fixed_point(prior, quad, v, delta, mmse(prior, roots.front(), quad));
}

PotentialCurve potential_curve(const DiscretePrior& prior, double delta, std::size_t n,
                               const QuadratureRule& quad) {
  require_delta(delta);
  if (n < 2) throw std::invalid_argument("potential curve needs at least 2 points");
  double v = prior.second_moment();
  PotentialCurve out;
  out.delta = delta;
  out.grid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double e = v * double(i) / double(n - 1);
    out.grid.push_back({e, i_rs(prior, e, delta, quad)});
  }
  return out;
}

}  // namespace rank1
