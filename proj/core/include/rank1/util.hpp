#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>

namespace rank1 {

// Every exponential feeding a normalized sum goes through this clip so a
// stray huge argument degrades to saturation instead of inf/nan.
inline constexpr double kExpClip = 700.0;

double clipped_exp(double x);

// log(sum(exp(logs))) with max subtraction; -inf for an empty span.
double log_sum_exp(std::span<const double> logs);

std::uint64_t split_mix64(std::uint64_t x);

// Deterministic random stream.  Normals use an explicit Box-Muller so the
// sequence does not depend on the standard library's distribution
// internals, only on mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();   // standard normal

  // Independent stream derived from this rng's seed and a stream index.
  Rng child(std::uint64_t stream) const;

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Worker count: RANK1_PHASE_WORKERS if set to a positive integer, else the
// hardware concurrency, else 1.
int default_workers();

// Runs body(i) for i in [0, count).  workers <= 0 means default_workers().
// Falls back to a plain loop when parallelism cannot help.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  int workers = 0);

}  // namespace rank1
