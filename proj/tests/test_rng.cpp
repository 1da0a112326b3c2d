#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "fewdp/rng.hpp"

using namespace fewdp;

TEST_CASE("streams are reproducible") {
  Philox a = Philox::stream(42, "unit", 3);
  Philox b = Philox::stream(42, "unit", 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct entities and modules give distinct streams") {
  Philox a = Philox::stream(42, "unit", 0);
  Philox b = Philox::stream(42, "unit", 1);
  Philox c = Philox::stream(42, "other", 0);
  Philox d = Philox::stream(43, "unit", 0);
  const uint64_t va = a.next_u64();
  CHECK(va != b.next_u64());
  CHECK(va != c.next_u64());
  CHECK(va != d.next_u64());
}

TEST_CASE("uniform doubles live in [0,1) and fill the range") {
  Philox rng = Philox::stream(1, "uniform", 0);
  double mn = 1.0, mx = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
  }
  CHECK(mn < 0.01);
  CHECK(mx > 0.99);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("gaussian moments are sane") {
  Philox rng = Philox::stream(2, "gauss", 0);
  const int n = 50000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    s += g;
    s2 += g * g;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("next_below stays in range and covers it") {
  Philox rng = Philox::stream(3, "below", 0);
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const uint64_t v = rng.next_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("log_uniform respects bounds") {
  Philox rng = Philox::stream(4, "logu", 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.log_uniform(1e-7, 1e-2);
    CHECK(v >= 1e-7);
    CHECK(v <= 1e-2);
  }
}
