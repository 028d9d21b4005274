#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "helpers.hpp"
#include "labelshift/error.hpp"
#include "labelshift/kernel.hpp"
#include "labelshift/rng.hpp"

using namespace labelshift;

namespace {
Matrix random_points(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (double& x : m.data()) x = rng.normal();
  return m;
}
}  // namespace

TEST_SUITE("kernel") {
  TEST_CASE("kernel params reject non-positive or non-finite g") {
    CHECK_THROWS_AS(KernelParams(0.0), ValidationError);
    CHECK_THROWS_AS(KernelParams(-1.0), ValidationError);
    CHECK_THROWS_AS(KernelParams(std::nan("")), ValidationError);
    CHECK_THROWS_AS(KernelParams{INFINITY}, ValidationError);
    CHECK(KernelParams(0.25).gamma_sq_inv() == 0.25);
  }

  TEST_CASE("kernel_eval examples") {
    const std::vector<double> o{0, 0}, e1{1, 0}, e2{2, 0};
    CHECK(kernel_eval(e1, e1, KernelParams(3.0)) == 1.0);
    CHECK(kernel_eval(o, e1, KernelParams(1.0)) == doctest::Approx(0.367879441171).epsilon(1e-12));
    CHECK(kernel_eval(o, e2, KernelParams(0.25)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    const std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(kernel_eval(o, three, KernelParams(1.0)), ValidationError);
  }

  TEST_CASE("kernel is symmetric and bounded") {
    Rng rng(3, "kernel-sym");
    for (int it = 0; it < 200; ++it) {
      std::vector<double> x(4), y(4);
      for (auto& v : x) v = rng.normal();
      for (auto& v : y) v = rng.normal();
      const KernelParams p(0.01 + rng.uniform());
      const double kxy = kernel_eval(x, y, p);
      CHECK(kxy == kernel_eval(y, x, p));
      CHECK(kxy > 0.0);
      CHECK(kxy < 1.0);
    }
  }

  TEST_CASE("gram examples") {
    const Matrix one{{0.5, -1.0}};
    const GramMatrix g1 = self_gram(one, KernelParams(2.0));
    CHECK(g1.values == Matrix{{1.0}});
    CHECK(g1.self);

    const Matrix twins{{1.0, 2.0}, {1.0, 2.0}};
    CHECK(self_gram(twins, KernelParams(5.0)).values == Matrix{{1.0, 1.0}, {1.0, 1.0}});

    const Matrix rows{{0.0, 0.0}};
    const Matrix cols{{1.0, 0.0}, {0.0, 0.0}};
    const GramMatrix g = gram(rows, cols, KernelParams(1.0));
    CHECK_FALSE(g.self);
    CHECK(g.values(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(g.values(0, 1) == 1.0);
  }

  TEST_CASE("gram rejects empty sets and dimension mismatch") {
    const Matrix empty(0, 2);
    const Matrix a{{1.0, 2.0}};
    const Matrix b{{1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(gram(empty, a, KernelParams(1.0)), ValidationError);
    CHECK_THROWS_AS(gram(a, empty, KernelParams(1.0)), ValidationError);
    CHECK_THROWS_AS(gram(a, b, KernelParams(1.0)), ValidationError);
  }

  TEST_CASE("gram entries equal kernel_eval") {
    Rng rng(4, "kernel-gram");
    const Matrix a = random_points(rng, 9, 3), b = random_points(rng, 13, 3);
    const KernelParams p(0.4);
    const GramMatrix g = gram(a, b, p);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 13; ++j)
        CHECK(g.values(i, j) == doctest::Approx(kernel_eval(a.row(i), b.row(j), p)).epsilon(1e-14));
  }

  TEST_CASE("self gram is symmetric, unit diagonal and positive semi-definite") {
    Rng rng(5, "kernel-psd");
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 5 + rng.index(46);
      const Matrix pts = random_points(rng, n, 1 + rng.index(4));
      const GramMatrix g = self_gram(pts, KernelParams(0.05 + 2.0 * rng.uniform()));
      Eigen::MatrixXd k(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(g.values(i, i) == 1.0);
        for (std::size_t j = 0; j < n; ++j) {
          CHECK(g.values(i, j) == g.values(j, i));
          CHECK(g.values(i, j) > 0.0);
          CHECK(g.values(i, j) <= 1.0);
          k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g.values(i, j);
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    }
  }

  TEST_CASE("gram_block selects rows and columns") {
    Rng rng(6, "kernel-block");
    const Matrix pts = random_points(rng, 8, 2);
    const GramMatrix full = self_gram(pts, KernelParams(1.0));
    const std::vector<std::size_t> r{1, 4, 7}, c{0, 4};
    const GramMatrix blk = gram_block(full, r, c);
    REQUIRE(blk.rows() == 3);
    REQUIRE(blk.cols() == 2);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(blk.values(i, j) == full.values(r[i], c[j]));
  }

  TEST_CASE("multiply_transposed matches a naive product") {
    Rng rng(7, "kernel-mult");
    const Matrix a = random_points(rng, 11, 23), bt = random_points(rng, 5, 23);
    const Matrix out = multiply_transposed(a, bt);
    REQUIRE(out.rows() == 11);
    REQUIRE(out.cols() == 5);
    for (std::size_t i = 0; i < 11; ++i)
      for (std::size_t c = 0; c < 5; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < 23; ++j) s += a(i, j) * bt(c, j);
        CHECK(out(i, c) == doctest::Approx(s).epsilon(1e-12));
      }
    CHECK_THROWS_AS(multiply_transposed(a, Matrix(2, 3)), ValidationError);
  }
}
