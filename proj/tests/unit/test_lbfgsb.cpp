#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "labelshift/error.hpp"
#include "labelshift/lbfgsb.hpp"

using namespace labelshift;

namespace {

// sum_i c_i (x_i - a_i)^2
ObjectiveFn separable_quadratic(Vector a, Vector c) {
  return [a, c](std::span<const double> x, std::span<double> g) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      f += c[i] * (x[i] - a[i]) * (x[i] - a[i]);
      g[i] = 2.0 * c[i] * (x[i] - a[i]);
    }
    return f;
  };
}

double rosenbrock(std::span<const double> x, std::span<double> g) {
  const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

}  // namespace

TEST_SUITE("lbfgsb") {
  TEST_CASE("unconstrained quadratic reaches its minimizer") {
    const auto fn = separable_quadratic({1.0, -2.0, 3.0}, {1.0, 10.0, 0.5});
    const LbfgsResult r = minimize_box(fn, {0.0, 0.0, 0.0}, {}, {});
    CHECK(r.status == LbfgsStatus::GradientTolerance);
    testutil::check_close(r.x, Vector{1.0, -2.0, 3.0}, 1e-8);
  }

  TEST_CASE("bounds are honored and active constraints found") {
    const auto fn = separable_quadratic({-1.0, 2.0, 0.5}, {1.0, 1.0, 1.0});
    const double inf = std::numeric_limits<double>::infinity();
    const LbfgsResult r = minimize_box(fn, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, {inf, 1.5, inf});
    testutil::check_close(r.x, Vector{0.0, 1.5, 0.5}, 1e-9);
    CHECK(r.pg_norm <= 1e-8);
  }

  TEST_CASE("starting point is projected onto the box") {
    const auto fn = separable_quadratic({5.0}, {1.0});
    LbfgsOptions opt;
    opt.max_iterations = 0;
    const LbfgsResult r = minimize_box(fn, {-3.0}, {0.0}, {1.0}, opt);
    CHECK(r.x[0] == 0.0);
    CHECK(r.status == LbfgsStatus::MaxIterations);
  }

  TEST_CASE("rosenbrock converges and the trace never increases") {
    LbfgsOptions opt;
    opt.record_trace = true;
    opt.max_iterations = 2000;
    const LbfgsResult r = minimize_box(rosenbrock, {-1.2, 1.0}, {}, {}, opt);
    testutil::check_close(r.x, Vector{1.0, 1.0}, 1e-6);
    REQUIRE(r.trace.size() == r.iterations + 1);
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1]);
  }

  TEST_CASE("objective decrease tolerance stops early") {
    LbfgsOptions opt;
    opt.decrease_tolerance = 1e-2;
    opt.pg_tolerance = 0.0;
    const LbfgsResult r = minimize_box(rosenbrock, {-1.2, 1.0}, {}, {}, opt);
    CHECK(r.status == LbfgsStatus::ObjectiveDecrease);
  }

  TEST_CASE("non-finite start is a numerical error") {
    const ObjectiveFn bad = [](std::span<const double>, std::span<double> g) {
      g[0] = 0.0;
      return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(minimize_box(bad, {0.0}, {}, {}), NumericalError);
  }

  TEST_CASE("preconditioned: exact inverse Hessian solves a quadratic in one step") {
    // f = 1/2 x'Ax - b'x with A = [[4, 1], [1, 3]].
    const double a[2][2] = {{4.0, 1.0}, {1.0, 3.0}}, det = 11.0;
    const double inv[2][2] = {{3.0 / det, -1.0 / det}, {-1.0 / det, 4.0 / det}};
    const PreconditionedFn fn = [&](std::span<const double> x, std::span<double> g, std::span<double> h) {
      g[0] = a[0][0] * x[0] + a[0][1] * x[1] - 1.0;
      g[1] = a[1][0] * x[0] + a[1][1] * x[1] - 2.0;
      h[0] = inv[0][0] * g[0] + inv[0][1] * g[1];
      h[1] = inv[1][0] * g[0] + inv[1][1] * g[1];
      return 0.5 * (x[0] * (a[0][0] * x[0] + a[0][1] * x[1]) + x[1] * (a[1][0] * x[0] + a[1][1] * x[1])) - x[0] -
             2.0 * x[1];
    };
    const LbfgsResult r = minimize_preconditioned(fn, {5.0, -5.0});
    CHECK(r.status == LbfgsStatus::GradientTolerance);
    CHECK(r.iterations == 1);
    testutil::check_close(r.x, Vector{1.0 / 11.0, 7.0 / 11.0}, 1e-12);
  }

  TEST_CASE("preconditioned: badly scaled quadratic converges faster with a diagonal preconditioner") {
    const Vector c{1.0, 1e4, 1e-2, 50.0}, target{1.0, -1.0, 2.0, 0.5};
    const auto plain = separable_quadratic(target, c);
    auto run = [&](bool diag) {
      const PreconditionedFn fn = [&](std::span<const double> x, std::span<double> g, std::span<double> h) {
        const double f = plain(x, g);
        for (std::size_t i = 0; i < x.size(); ++i) h[i] = diag ? g[i] / (2.0 * c[i]) : g[i];
        return f;
      };
      LbfgsOptions opt;
      opt.pg_tolerance = 1e-9;
      return minimize_preconditioned(fn, Vector(4, 0.0), opt);
    };
    const LbfgsResult id = run(false), pre = run(true);
    CHECK(id.status == LbfgsStatus::GradientTolerance);
    CHECK(pre.status == LbfgsStatus::GradientTolerance);
    CHECK(pre.iterations <= 2);
    CHECK(pre.iterations < id.iterations);
    testutil::check_close(pre.x, target, 1e-9);
    testutil::check_close(id.x, target, 1e-7);
  }

  TEST_CASE("preconditioned: identity H0 on Rosenbrock decreases monotonically to the minimizer") {
    const PreconditionedFn fn = [](std::span<const double> x, std::span<double> g, std::span<double> h) {
      const double f = rosenbrock(x, g);
      std::copy(g.begin(), g.end(), h.begin());
      return f;
    };
    LbfgsOptions opt;
    opt.pg_tolerance = 1e-9;
    opt.record_trace = true;
    const LbfgsResult r = minimize_preconditioned(fn, {-1.2, 1.0}, opt);
    CHECK(r.status == LbfgsStatus::GradientTolerance);
    testutil::check_close(r.x, Vector{1.0, 1.0}, 1e-6);
    for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1]);
    const PreconditionedFn bad = [](std::span<const double>, std::span<double>, std::span<double>) {
      return std::numeric_limits<double>::infinity();
    };
    CHECK_THROWS_AS(minimize_preconditioned(bad, {0.0}), NumericalError);
  }

  TEST_CASE("status names") {
    CHECK(to_string(LbfgsStatus::GradientTolerance) == "gradient_tolerance");
    CHECK(to_string(LbfgsStatus::LineSearchFailed) == "line_search_failed");
  }
}
