#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "cpmdid/rng.hpp"

using namespace cpmdid;

TEST_CASE("identical seeds replay the same sequence") {
  Rng a(1234u), b(1234u);
  for (int i = 0; i < 64; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("stream derivation is stable and decorrelated") {
  CHECK(derive_seed(7u, 0) == derive_seed(7u, 0));
  CHECK(derive_seed(7u, 0) != derive_seed(7u, 1));
  CHECK(derive_seed(7u, 0) != derive_seed(8u, 0));

  Rng a = Rng::stream(99u, 0);
  Rng b = Rng::stream(99u, 1);
  int collisions = 0;
  for (int i = 0; i < 256; ++i) {
    if (a.next() == b.next()) ++collisions;
  }
  CHECK(collisions == 0);
}

TEST_CASE("uniform stays inside the open interval") {
  Rng rng(5u);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform moments") {
  Rng rng(17u);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal moments") {
  Rng rng(23u);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0, sumcube = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
    sumcube += z * z * z;
  }
  CHECK(sum / n == doctest::Approx(0.0).scale(1.0).epsilon(0.01));
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(sumcube / n == doctest::Approx(0.0).scale(1.0).epsilon(0.05));
}

TEST_CASE("logistic variance is pi^2/3") {
  Rng rng(29u);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.logistic();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.0).scale(1.0).epsilon(0.02));
  CHECK(sumsq / n - mean * mean ==
        doctest::Approx(M_PI * M_PI / 3.0).epsilon(0.03));
}

TEST_CASE("bernoulli frequency") {
  Rng rng(31u);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3);
  CHECK(double(hits) / n == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("below covers the range uniformly") {
  Rng rng(37u);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t k = rng.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(double(c) == doctest::Approx(n / 7.0).epsilon(0.05));
  CHECK_THROWS(rng.below(0));
}
