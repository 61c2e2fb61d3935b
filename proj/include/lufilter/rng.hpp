#pragma once

#include <cstdint>
#include <random>

namespace luf {

// Deterministic random stream. All distributions are derived from the raw
// 64-bit generator output through fixed arithmetic (inverse-CDF normals, not
// std::normal_distribution, whose algorithm is implementation-defined), so a
// given (seed, call sequence) reproduces bit-identical doubles everywhere
// IEEE-754 holds. Named sub-streams via child() keep independent components
// (field draws, chain updates, replications) decoupled from each other's
// consumption order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream addressed by (this stream's seed, tag).
  Rng child(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform();                    // open interval (0,1)
  double uniform(double a, double b);  // a + (b-a)*uniform()
  double normal();                     // standard normal via inverse CDF
  double normal(double mean, double sd);
  int uniform_int(int lo, int hi);  // inclusive bounds, unbiased

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// SplitMix64 output function; used for seed mixing.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace luf
