#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace qafuse {

/// Seeded generator with platform-independent derived draws (the standard
/// distributions are implementation-defined, the raw engine is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). Requires n > 0.
  std::size_t uniform_index(std::size_t n);

  /// Uniform real in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// `k` distinct elements of `pool` in draw order (partial Fisher-Yates).
  template <class T>
  std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k) {
    if (k > pool.size()) k = pool.size();
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

inline std::size_t Rng::uniform_index(std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

}  // namespace qafuse
