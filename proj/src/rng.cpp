#include "lufilter/rng.hpp"

#include <stdexcept>

#include "lufilter/stats.hpp"

namespace luf {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

Rng Rng::child(std::uint64_t tag) const {
  return Rng(splitmix64(seed_ + 0x9E3779B97F4A7C15ull * (tag + 1)));
}

std::uint64_t Rng::next_u64() { return gen_(); }

double Rng::uniform() {
  // 53 significant bits, offset by half an ulp: values (k+0.5)*2^-53, k in
  // [0, 2^53), so the result is never exactly 0 or 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

double Rng::normal() { return normal_quantile(uniform()); }

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

int Rng::uniform_int(int lo, int hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  const std::uint64_t n = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  const std::uint64_t reject_above = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= reject_above);
  return lo + static_cast<int>(x % n);
}

}  // namespace luf
