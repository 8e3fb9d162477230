#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace evpower {

/// Seeded PRNG with hand-rolled distributions so that every artifact is
/// reproducible byte-for-byte regardless of the standard library's
/// distribution internals. The raw engine is mt19937_64, whose output
/// sequence the standard pins down exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  /// Box-Muller transform; consumes two uniforms per draw.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = 1.0 - u01();  // (0, 1], keeps log() finite
    double u2 = u01();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace evpower
