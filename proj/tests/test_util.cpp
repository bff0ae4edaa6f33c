#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "rank1/util.hpp"

using namespace rank1;

TEST_CASE("split_mix64 is deterministic and spreads inputs") {
  CHECK(split_mix64(1) == split_mix64(1));
  CHECK(split_mix64(1) != split_mix64(2));
  CHECK(split_mix64(0) != 0);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42), d(43);
  bool all_equal = true;
  for (int i = 0; i < 10; ++i) all_equal &= (c.next_u64() == d.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("child streams are independent of parent consumption") {
  Rng parent(7);
  Rng child_before = parent.child(3);
  parent.next_u64();
  parent.normal();
  Rng child_after = parent.child(3);
  for (int i = 0; i < 20; ++i) {
    CHECK(child_before.next_u64() == child_after.next_u64());
  }
  Rng other = parent.child(4);
  CHECK(other.next_u64() != parent.child(3).next_u64());
}

TEST_CASE("uniform lies in [0, 1) and normal has the right moments") {
  Rng rng(11);
  const int n = 200000;
  double mean = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double z = rng.normal();
    mean += z;
    sq += z * z;
  }
  mean /= n;
  sq /= n;
  CHECK(std::abs(mean) < 0.01);          // ~4.5 sigma at this n
  CHECK(std::abs(sq - 1.0) < 0.02);
}

TEST_CASE("clipped_exp matches exp inside the clip and saturates outside") {
  for (double x : {-10.0, -1.0, 0.0, 1.0, 100.0}) {
    CHECK(clipped_exp(x) == doctest::Approx(std::exp(x)).epsilon(1e-15));
  }
  CHECK(std::isfinite(clipped_exp(1e6)));
  CHECK(clipped_exp(1e6) == clipped_exp(800.0));
  CHECK(clipped_exp(-1e6) >= 0.0);
}

TEST_CASE("log_sum_exp handles offsets and empty input") {
  std::vector<double> logs = {1000.0, 1000.0};
  CHECK(log_sum_exp(logs) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));
  std::vector<double> single = {-1234.5};
  CHECK(log_sum_exp(single) == doctest::Approx(-1234.5));
  CHECK(log_sum_exp({}) == -std::numeric_limits<double>::infinity());
  std::vector<double> mixed = {0.0, -std::numeric_limits<double>::infinity()};
  CHECK(log_sum_exp(mixed) == doctest::Approx(0.0));
}

TEST_CASE("parallel_for covers every index exactly once") {
  const std::size_t n = 1000;
  for (int workers : {1, 4}) {
    std::vector<std::atomic<int>> hits(n);
    parallel_for(n, [&](std::size_t i) { hits[i].fetch_add(1); }, workers);
    for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);
  }
  parallel_for(0, [&](std::size_t) { CHECK(false); }, 2);
}

TEST_CASE("worker count honors the environment variable") {
  setenv("RANK1_PHASE_WORKERS", "5", 1);
  CHECK(default_workers() == 5);
  unsetenv("RANK1_PHASE_WORKERS");
  CHECK(default_workers() >= 1);
}
