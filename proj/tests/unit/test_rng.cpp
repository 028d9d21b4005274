#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "labelshift/error.hpp"
#include "labelshift/rng.hpp"

using namespace labelshift;

TEST_SUITE("rng") {
  TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  }

  TEST_CASE("streams replay and are distinct") {
    Rng a(42, "x", {1, 2}), b(42, "x", {1, 2}), c(42, "y", {1, 2}), d(42, "x", {2, 1}), e(43, "x", {1, 2});
    const auto first = a.next();
    CHECK(first == b.next());
    CHECK(first != c.next());
    CHECK(first != d.next());
    CHECK(first != e.next());
  }

  TEST_CASE("engine output is the standard mt19937_64 seeded by seed_seq") {
    Rng r(7, "stream", {3});
    const std::uint64_t h = fnv1a64("stream");
    std::seed_seq seq{static_cast<std::uint32_t>(7), static_cast<std::uint32_t>(0),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(3), static_cast<std::uint32_t>(0)};
    std::mt19937_64 ref(seq);
    CHECK(r.next() == ref());
  }

  TEST_CASE("uniform and index ranges") {
    Rng r(1, "ranges");
    for (int i = 0; i < 10000; ++i) {
      const double u = r.uniform();
      CHECK((u >= 0.0 && u < 1.0));
      const double o = r.uniform_open();
      CHECK((o > 0.0 && o < 1.0));
      CHECK(r.index(7) < 7);
    }
    CHECK(r.index(1) == 0);
    CHECK_THROWS_AS(r.index(0), ValidationError);
  }

  TEST_CASE("normal moments") {
    Rng r(2, "normal");
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = r.normal();
      s += x;
      s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.015);
  }

  TEST_CASE("gamma mean and variance equal the shape") {
    for (double shape : {0.3, 1.0, 2.5, 10.0}) {
      Rng r(3, "gamma", {static_cast<std::uint64_t>(shape * 10)});
      const int n = 100000;
      double s = 0, s2 = 0;
      for (int i = 0; i < n; ++i) {
        const double x = r.gamma(shape);
        CHECK(x >= 0.0);
        s += x;
        s2 += x * x;
      }
      const double mean = s / n, var = s2 / n - mean * mean;
      CHECK(std::abs(mean - shape) < 5.0 * std::sqrt(shape / n));
      CHECK(std::abs(var - shape) < 0.05 * shape + 0.01);
    }
    Rng r(3, "gamma-bad");
    CHECK_THROWS_AS(r.gamma(0.0), ValidationError);
  }

  TEST_CASE("dirichlet draws lie on the simplex with the right mean") {
    Rng r(4, "dirichlet");
    Vector mean(4, 0.0);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const Vector q = dirichlet(r, 4, 0.5);
      CHECK(std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) < 1e-12);
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(q[k] >= 0.0);
        mean[k] += q[k] / n;
      }
    }
    for (double m : mean) CHECK(std::abs(m - 0.25) < 0.01);
  }

  TEST_CASE("tiny alpha still yields a valid simplex vector") {
    Rng r(5, "dirichlet-tiny");
    for (int i = 0; i < 100; ++i) {
      const Vector q = dirichlet(r, 3, 1e-4);
      CHECK(std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) < 1e-12);
    }
  }

  TEST_CASE("shuffle is a permutation and replays") {
    std::vector<int> a(50), b;
    std::iota(a.begin(), a.end(), 0);
    b = a;
    Rng r1(6, "shuffle"), r2(6, "shuffle");
    r1.shuffle(std::span(a));
    r2.shuffle(std::span(b));
    CHECK(a == b);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  }
}
