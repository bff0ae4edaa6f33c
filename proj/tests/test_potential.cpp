#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rank1/channels.hpp"
#include "rank1/potential.hpp"
#include "rank1/prior.hpp"

using namespace rank1;

namespace {
const DiscretePrior& wb() {
  static DiscretePrior p = make_prior({0.0, 1.0}, {0.98, 0.02});
  return p;
}
}  // namespace

TEST_CASE("potential at the uninformative endpoint has no channel term") {
  for (double delta : {0.0008, 0.002, 0.5}) {
    double v = wb().second_moment();
    CHECK(i_rs(wb(), v, delta) == doctest::Approx(v * v / (4 * delta)).epsilon(1e-15));
  }
  DiscretePrior rad = make_prior({-1.0, 1.0}, {0.5, 0.5});
  CHECK(i_rs(rad, 1.0, 0.7) == doctest::Approx(1.0 / 2.8).epsilon(1e-15));
  CHECK(scalar_log_partition(rad, 0.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}

TEST_CASE("curve grid spans [0, v] with increasing e") {
  PotentialCurve c = potential_curve(wb(), 0.001, 9);
  REQUIRE(c.grid.size() == 9);
  CHECK(c.grid.front().e == 0.0);
  CHECK(c.grid.back().e == doctest::Approx(wb().second_moment()).epsilon(1e-15));
  for (std::size_t i = 1; i < c.grid.size(); ++i) {
    CHECK(c.grid[i].e > c.grid[i - 1].e);
  }
}

TEST_CASE("stationary structure across the coexistence window") {
  // single good minimum below delta_amp
  StationaryPoints lo = stationary_points(wb(), 0.0008);
  REQUIRE(lo.points.size() == 1);
  CHECK(lo.points[0].kind == StationaryKind::minimum);
  CHECK(lo.points[0].e == doctest::Approx(1.3119097426533698e-3).epsilon(1e-8));

  // three branches inside the window
  StationaryPoints mid = stationary_points(wb(), 0.0011);
  REQUIRE(mid.points.size() == 3);
  CHECK(mid.points[0].e == doctest::Approx(4.4483480229973787e-3).epsilon(1e-8));
  CHECK(mid.points[1].e == doctest::Approx(1.6659313850104801e-2).epsilon(1e-8));
  CHECK(mid.points[2].e == doctest::Approx(1.9248137958347802e-2).epsilon(1e-8));
  CHECK(mid.points[0].kind == StationaryKind::minimum);
  CHECK(mid.points[1].kind == StationaryKind::maximum);
  CHECK(mid.points[2].kind == StationaryKind::minimum);
  CHECK(mid.points[0].branch == Branch::good);
  CHECK(mid.points[1].branch == Branch::unstable);
  CHECK(mid.points[2].branch == Branch::bad);
  CHECK(&mid.global_minimum() == &mid.points[0]);

  // every root satisfies the fixed point equation it was solved from
  double v = wb().second_moment();
  for (const StationaryPoint& s : mid.points) {
    double residual = std::abs(s.e - mmse(wb(), (v - s.e) / 0.0011));
    CHECK(residual <= 1e-10 * std::max(1.0, v));
  }

  // past delta_rs the bad branch takes the global minimum
  StationaryPoints hi = stationary_points(wb(), 0.00125);
  REQUIRE(hi.points.size() == 3);
  CHECK(hi.global_minimum().e == doctest::Approx(1.9349536113440986e-2).epsilon(1e-8));
  for (const StationaryPoint& s : hi.points) {
    CHECK(hi.global_minimum().potential <= s.potential + 1e-15);
    CHECK(s.potential == doctest::Approx(i_rs(wb(), s.e, 0.00125)).epsilon(1e-12));
  }
}

TEST_CASE("finite differences vanish at stationary points") {
  // run at order 301: the default order carries a deterministic quadrature
  // gap ~3e-5 between the FD derivative and the g-root locations
  QuadratureRule q = gauss_hermite(301);
  StationaryPoints sp = stationary_points(wb(), 0.0011, q);
  double v = wb().second_moment();
  double scale = std::max(1.0, v / (2 * 0.0011));
  double h = 1e-6 * std::max(1.0, v);
  for (const StationaryPoint& s : sp.points) {
    double fd =
        (i_rs(wb(), s.e + h, 0.0011, q) - i_rs(wb(), s.e - h, 0.0011, q)) / (2 * h);
    CHECK(std::abs(fd) <= 1e-6 * scale);
  }
}

TEST_CASE("sparse bernoulli thresholds") {
  Thresholds th = compute_thresholds(wb());
  CHECK(th.delta_amp == doctest::Approx(9.535804062710471e-4).epsilon(1e-6));
  CHECK(th.delta_rs == doctest::Approx(1.236166581961864e-3).epsilon(1e-7));
  CHECK(th.delta_opt == th.delta_rs);
  CHECK(th.delta_spectral == doctest::Approx(4e-4).epsilon(1e-14));
  CHECK(th.order == TransitionOrder::first_order);
  CHECK(th.delta_amp > 0.0008);
  CHECK(th.delta_amp < 0.0012);
  CHECK(th.delta_rs > 0.0012);
  CHECK(th.delta_rs < 0.00125);
}

TEST_CASE("community thresholds and the exact algorithmic boundary") {
  struct Row { double rho, delta_rs; };
  // first-order region: delta_rs strictly above the stability point
  for (const Row& r : {Row{0.05, 1.6665184039191401},
                       Row{0.10, 1.1799473212292666},
                       Row{0.15, 1.0395940701464697}}) {
    DiscretePrior p = community_detection_prior(r.rho);
    Thresholds th = compute_thresholds(p);
    CHECK(th.delta_amp == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(th.delta_rs == doctest::Approx(r.delta_rs).epsilon(1e-6));
    CHECK(th.order == TransitionOrder::first_order);
  }
  // balanced groups: higher order transition, all thresholds collapse to v^2
  DiscretePrior half = community_detection_prior(0.5);
  Thresholds th = compute_thresholds(half);
  CHECK(th.delta_amp == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(th.delta_rs == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(th.order != TransitionOrder::first_order);
}

TEST_CASE("zero mean priors sit exactly at the stability boundary") {
  DiscretePrior rad = make_prior({-1.0, 1.0}, {0.5, 0.5});
  CHECK(find_delta_amp(rad) == doctest::Approx(1.0).epsilon(1e-9));
  DiscretePrior scaled = make_prior({-2.0, 2.0}, {0.5, 0.5});
  CHECK(find_delta_amp(scaled) == doctest::Approx(16.0).epsilon(1e-9));
}

TEST_CASE("first order region boundaries") {
  auto bern = [](double rho) { return make_prior({0.0, 1.0}, {1.0 - rho, rho}); };
  double rho_star = first_order_boundary(bern, 0.02, 0.08, 1e-4);
  CHECK(rho_star > 0.039);
  CHECK(rho_star < 0.043);

  double tric = first_order_boundary(
      [](double rho) { return community_detection_prior(rho); }, 0.15, 0.3, 1e-4);
  CHECK(tric == doctest::Approx(0.5 - std::sqrt(1.0 / 12.0)).epsilon(5e-3));
}

TEST_CASE("mutual information is continuous through the transition") {
  Thresholds th = compute_thresholds(wb());
  double eps = 1e-9 * th.delta_rs;
  MutualInfo below = mutual_information(wb(), th.delta_rs - eps);
  MutualInfo above = mutual_information(wb(), th.delta_rs + eps);
  CHECK(std::abs(below.value - above.value) < 1e-6);
  // but the minimizer jumps between branches
  CHECK(above.argmin_e - below.argmin_e > 5e-3);
}

TEST_CASE("matrix mmse jumps at the transition") {
  Thresholds th = compute_thresholds(wb());
  MatrixMmse below = matrix_mmse(wb(), 0.999 * th.delta_rs);
  MatrixMmse above = matrix_mmse(wb(), 1.001 * th.delta_rs);
  CHECK_FALSE(below.ambiguous);
  CHECK(below.value < above.value);
  CHECK(above.value - below.value > 1e-5);
  CHECK(below.low <= below.value);
  CHECK(below.value <= below.high);

  double v = wb().second_moment();
  double eg = good_branch_e(wb(), 0.0008);
  MatrixMmse easy = matrix_mmse(wb(), 0.0008);
  CHECK(easy.value == doctest::Approx(v * v - (v - eg) * (v - eg)).epsilon(1e-10));
}

TEST_CASE("vector mmse is proven outside the window only") {
  Thresholds th = compute_thresholds(wb());
  VectorMmse low = vector_mmse(wb(), 0.0008, th);
  CHECK(low.proven);
  CHECK(low.value == doctest::Approx(good_branch_e(wb(), 0.0008)).epsilon(1e-9));
  VectorMmse inside = vector_mmse(wb(), 0.0011, th);
  CHECK_FALSE(inside.proven);
  VectorMmse same = vector_mmse(wb(), 0.0011);
  CHECK(same.value == doctest::Approx(inside.value).epsilon(1e-12));
}

TEST_CASE("branch accessors agree with the stationary table") {
  StationaryPoints mid = stationary_points(wb(), 0.0011);
  CHECK(good_branch_e(wb(), 0.0011) == doctest::Approx(mid.points[0].e).epsilon(1e-8));
  CHECK(bad_branch_e(wb(), 0.0011) == doctest::Approx(mid.points[2].e).epsilon(1e-8));
  CHECK_THROWS_AS((void)bad_branch_e(wb(), 0.0001), std::domain_error);
}
