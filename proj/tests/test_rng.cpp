#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "memg/rng.hpp"

using namespace memg;

TEST_CASE("same seed gives an identical stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
    CHECK(a.below(97) == b.below(97));
  }
}

TEST_CASE("mt19937_64 reference value anchors the stream") {
  // the standard fixes the 10000th output of the default-seeded engine
  std::mt19937_64 ref(std::mt19937_64::default_seed);
  ref.discard(9999);
  CHECK(ref() == 9981545732273789042ull);
}

TEST_CASE("uniform stays in the half-open unit interval") {
  Rng r(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("normal moments are near standard") {
  Rng r(123);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("below covers its range without bias") {
  Rng r(5);
  const std::uint64_t n = 10;
  std::vector<int> counts(n, 0);
  for (int i = 0; i < 100000; ++i) {
    const std::uint64_t v = r.below(n);
    REQUIRE(v < n);
    ++counts[v];
  }
  for (int c : counts) {
    CHECK(c > 9500);
    CHECK(c < 10500);
  }
  CHECK(r.below(1) == 0);
  CHECK_THROWS_AS(r.below(0), UsageError);
}

TEST_CASE("shuffle permutes and is seed-stable") {
  Rng a(11), b(11);
  std::vector<int> va(20), vb(20);
  std::iota(va.begin(), va.end(), 0);
  std::iota(vb.begin(), vb.end(), 0);
  a.shuffle(va);
  b.shuffle(vb);
  CHECK(va == vb);

  std::vector<int> sorted = va;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(20);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
}
