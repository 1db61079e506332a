#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rgdno {

// Seeded random source. Normal deviates come from an explicit Box-Muller
// transform rather than std::normal_distribution, whose output sequence is
// not pinned by the standard; every draw here is reproducible from the seed
// alone, independent of the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal.
  double normal();
  std::vector<double> normal_vector(std::size_t n);

  // Independent stream derived from (seed, stream_id), e.g. one per run.
  Rng fork(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rgdno
