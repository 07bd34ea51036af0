#ifndef NVQA_RNG_HPP_
#define NVQA_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace nvqa {

// Seeded generator built on std::mt19937_64.
//
// The engine sequence is fixed by the C++ standard, but the standard
// distributions are not, so every draw below is derived from raw 64-bit
// engine output with our own transforms. Same seed, same numbers, on any
// conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); rejection sampling avoids modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (one value cached).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  // Independent child stream; used to give sub-tasks their own sequence.
  Rng fork(std::uint64_t stream);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// splitmix64 finalizer, used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// FNV-1a of a string; gives per-key streams that do not depend on key order.
std::uint64_t hash_string(std::string_view s);

}  // namespace nvqa

#endif  // NVQA_RNG_HPP_
