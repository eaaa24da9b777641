#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "memg/errors.hpp"

namespace memg {

// Deterministic random helper. The mt19937_64 engine is fully specified by
// the standard, but the standard distributions are not, so every mapping from
// raw engine output to a usable value is written out here and stays fixed.
// Two builds with the same seed therefore produce identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform double in [0, 1), built from the top 53 bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. The cosine branch is returned first, the
  // sine branch cached for the next call.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw UsageError("Rng::below: n must be positive");
    const std::uint64_t excess =
        (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;  // 2^64 mod n
    if (excess == 0) return gen_() % n;
    const std::uint64_t bound = std::uint64_t(0) - excess;  // 2^64 - excess
    std::uint64_t v = gen_();
    while (v >= bound) v = gen_();
    return v % n;
  }

  // Fisher-Yates shuffle driven by below().
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace memg
