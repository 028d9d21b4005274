#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "labelshift/error.hpp"
#include "labelshift/shiftlab.hpp"
#include "labelshift/synthetic.hpp"

using namespace labelshift;

namespace {

Dataset triangle_pool(std::size_t per_class, std::uint64_t seed = 11) {
  Rng rng(seed, "shiftlab-pool");
  const std::vector<std::size_t> counts(3, per_class);
  return GaussianMixture::triangle(1.0, 0.4).sample(rng, counts);
}

CvGrid tiny_grid() {
  CvGrid g;
  g.c_values = {1.0};
  g.g_values = {0.5};
  return g;
}

std::size_t count_of(std::span<const int> labels, int c) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
}

}  // namespace

TEST_SUITE("shiftlab") {
  TEST_CASE("ShiftSpec validation") {
    CHECK_NOTHROW(ShiftSpec{1.0, 3, 1, 1, 1, 0}.validate(3));
    CHECK_THROWS_AS((ShiftSpec{0.0, 3, 1, 1, 1, 0}.validate(3)), ValidationError);
    CHECK_THROWS_AS((ShiftSpec{1.0, 4, 1, 1, 1, 0}.validate(3)), ValidationError);
    CHECK_THROWS_AS((ShiftSpec{1.0, 0, 1, 1, 1, 0}.validate(3)), ValidationError);
    CHECK_THROWS_AS((ShiftSpec{1.0, 3, 1, 0, 1, 0}.validate(3)), ValidationError);
  }

  TEST_CASE("source counts are uniform with the remainder on the lowest classes") {
    const Dataset pool = triangle_pool(20);
    const ShiftSpec spec{1.0, 3, 11, 5, 5, 1};
    const auto idx = draw_source_indices(pool, spec, 0);
    const Dataset src = pool.subset(idx);
    CHECK(src.class_counts() == std::vector<std::size_t>{4, 4, 3});
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
    CHECK(draw_source_indices(pool, spec, 0) == idx);
    CHECK(draw_source_indices(pool, spec, 1) != idx);
  }

  TEST_CASE("scenario pieces are disjoint and sized") {
    const Dataset pool = triangle_pool(200);
    const ShiftSpec spec{1.0, 2, 60, 90, 45, 5};
    for (std::size_t rep = 0; rep < 10; ++rep) {
      const Scenario sc = sample_shift_scenario(pool, spec, rep, rep + 1);
      CHECK(sc.source.size() == 60);
      CHECK(sc.target_unlabeled.rows() == 90);
      CHECK(sc.target_labels.size() == 90);
      CHECK(sc.test.size() == 45);
      std::set<std::size_t> all;
      for (auto v : {&sc.source_index, &sc.target_index, &sc.test_index}) all.insert(v->begin(), v->end());
      CHECK(all.size() == 60 + 90 + 45);

      // Rows match the pool and labels are withheld in a parallel vector.
      for (std::size_t i = 0; i < 90; ++i) {
        const std::size_t r = sc.target_index[i];
        CHECK(sc.target_labels[i] == pool.labels[r]);
        CHECK(sc.target_unlabeled(i, 0) == pool.features(r, 0));
      }

      REQUIRE(sc.target_classes.size() == 2);
      CHECK(std::is_sorted(sc.target_classes.begin(), sc.target_classes.end()));
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const bool on = std::find(sc.target_classes.begin(), sc.target_classes.end(), c) != sc.target_classes.end();
        if (!on) {
          CHECK(sc.q_true[static_cast<std::size_t>(c)] == 0.0);
          CHECK(count_of(sc.target_labels, c) == 0);
          CHECK(count_of(sc.test.labels, c) == 0);
        }
        s += sc.q_true[static_cast<std::size_t>(c)];
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("huge concentration gives near-uniform targets") {
    const Dataset pool = triangle_pool(100);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Scenario sc = sample_shift_scenario(pool, ShiftSpec{1e6, 3, 30, 30, 30, seed});
      for (double q : sc.q_true) CHECK(std::abs(q - 1.0 / 3.0) <= 0.02);
    }
  }

  TEST_CASE("one supported class gives a one-hot target") {
    const Dataset pool = triangle_pool(100);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Scenario sc = sample_shift_scenario(pool, ShiftSpec{1.0, 1, 30, 40, 20, seed});
      REQUIRE(sc.target_classes.size() == 1);
      const int c = sc.target_classes[0];
      for (int k = 0; k < 3; ++k) CHECK(sc.q_true[static_cast<std::size_t>(k)] == (k == c ? 1.0 : 0.0));
      CHECK(count_of(sc.target_labels, c) == 40);
      CHECK(count_of(sc.test.labels, c) == 20);
    }
  }

  TEST_CASE("target class counts follow n_q q_true on average") {
    const Dataset pool = triangle_pool(400);
    const std::size_t n_q = 100, seeds = 200;
    double sum_dev[3] = {0, 0, 0}, sum_var[3] = {0, 0, 0};
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      const Scenario sc = sample_shift_scenario(pool, ShiftSpec{1.0, 3, 30, n_q, 50, seed});
      for (int c = 0; c < 3; ++c) {
        const double q = sc.q_true[static_cast<std::size_t>(c)];
        sum_dev[c] += static_cast<double>(count_of(sc.target_labels, c)) - static_cast<double>(n_q) * q;
        sum_var[c] += static_cast<double>(n_q) * q * (1.0 - q);
      }
    }
    for (int c = 0; c < 3; ++c) {
      const double mean_dev = sum_dev[c] / static_cast<double>(seeds);
      const double se = std::sqrt(sum_var[c]) / static_cast<double>(seeds);
      INFO("class " << c << " mean deviation " << mean_dev << " se " << se);
      CHECK(std::abs(mean_dev) <= 3.0 * se);
    }
  }

  TEST_CASE("short pools name the class") {
    Dataset pool = triangle_pool(30);
    pool.class_values = {10, 20, 30};
    CHECK_THROWS_WITH_AS(sample_shift_scenario(pool, ShiftSpec{1.0, 3, 93, 5, 5, 0}),
                         doctest::Contains("class 10"), ValidationError);
    // Target demand beyond what the source left over.
    CHECK_THROWS_WITH_AS(sample_shift_scenario(pool, ShiftSpec{1.0, 1, 60, 20, 20, 0}),
                         doctest::Contains("unused rows of class"), ValidationError);
  }

  TEST_CASE("metrics") {
    const std::vector<int> a{1, 2, 3}, b{1, 2, 1}, c{0, 0, 0};
    CHECK(metric_acc(a, a) == 1.0);
    CHECK(metric_acc(a, c) == 0.0);
    CHECK(metric_acc(a, b) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(metric_acc(a, std::vector<int>{1}), ValidationError);
    CHECK_THROWS_AS(metric_acc(std::vector<int>{}, std::vector<int>{}), ValidationError);

    CHECK(metric_mse(Vector{0.2, 0.8}, Vector{0.2, 0.8}) == 0.0);
    CHECK(metric_mse(Vector{1.0, 0.0}, Vector{0.0, 1.0}) == 1.0);
    CHECK(metric_mse(Vector{0.6, 0.4}, Vector{0.5, 0.5}) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK_THROWS_AS(metric_mse(Vector{0.6, 0.6}, Vector{0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(metric_mse(Vector{1.2, -0.2}, Vector{0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(metric_mse(Vector{1.0}, Vector{0.5, 0.5}), ValidationError);

    Rng rng(4, "mse-symmetry");
    for (int i = 0; i < 100; ++i) {
      const Vector x = dirichlet(rng, 4, 0.7), y = dirichlet(rng, 4, 0.7);
      CHECK(metric_mse(x, y) == metric_mse(y, x));
    }
  }

  TEST_CASE("method names") {
    for (Method m : {Method::Cpmkm, Method::Bbse, Method::Rlls, Method::Mlls})
      CHECK(parse_method(method_name(m)) == m);
    CHECK_THROWS_WITH_AS(parse_method("kmm"), doctest::Contains("cpmkm, bbse, rlls, mlls"), ValidationError);
  }

  TEST_CASE("stratified holdout") {
    const Dataset pool = triangle_pool(20);
    const auto [train, hold] = stratified_holdout(pool, 0.25, 3, 0);
    CHECK(train.size() == 45);
    CHECK(hold.size() == 15);
    CHECK(pool.subset(hold).class_counts() == std::vector<std::size_t>{5, 5, 5});
    CHECK(std::is_sorted(train.begin(), train.end()));
    std::set<std::size_t> all(train.begin(), train.end());
    all.insert(hold.begin(), hold.end());
    CHECK(all.size() == 60);
    // At least one row each side even for tiny classes.
    const auto [t2, h2] = stratified_holdout(triangle_pool(2), 0.01, 3, 0);
    CHECK(h2.size() == 3);
    CHECK_THROWS_AS(stratified_holdout(pool, 1.0, 3, 0), ValidationError);
    CHECK_THROWS_AS(stratified_holdout(triangle_pool(1), 0.5, 3, 0), ValidationError);
  }

  TEST_CASE("summaries use the sample standard deviation") {
    std::vector<EvalReport> rs(3);
    const double mses[] = {1.0, 2.0, 4.0};
    for (int i = 0; i < 3; ++i) {
      rs[static_cast<std::size_t>(i)].method = Method::Bbse;
      rs[static_cast<std::size_t>(i)].mse = mses[i];
      rs[static_cast<std::size_t>(i)].acc = 0.5;
    }
    const std::vector<Method> ms{Method::Bbse, Method::Mlls};
    const auto s = summarize(rs, ms);
    REQUIRE(s.size() == 2);
    CHECK(s[0].count == 3);
    CHECK(s[0].mse_mean == doctest::Approx(7.0 / 3.0));
    CHECK(s[0].mse_std == doctest::Approx(std::sqrt(7.0 / 3.0)));
    CHECK(s[0].acc_std == 0.0);
    CHECK(s[1].count == 0);
  }

  TEST_CASE("benchmark: one cell, one method, one report") {
    const Dataset pool = triangle_pool(100);
    BenchmarkOptions opt;
    opt.grid = tiny_grid();
    const std::vector<Method> ms{Method::Cpmkm};
    const auto res = run_benchmark(pool, ShiftSpec{1.0, 3, 60, 40, 40, 2}, ms, 1, 1, opt);
    REQUIRE(res.reports.size() == 1);
    CHECK(res.fits.size() == 1);
    const auto& r = res.reports[0];
    CHECK(r.acc >= 0.0);
    CHECK(r.acc <= 1.0);
    CHECK(r.mse >= 0.0);
    CHECK(r.q_hat.size() == 3);
    CHECK(r.model_fingerprint == res.fits[0].model_fingerprint);
  }

  TEST_CASE("benchmark: fairness, ordering and determinism") {
    const Dataset pool = triangle_pool(80);
    BenchmarkOptions opt;
    opt.grid = tiny_grid();
    opt.grid.c_values = {0.1, 1.0};
    const std::vector<Method> ms{Method::Cpmkm, Method::Bbse, Method::Rlls, Method::Mlls};
    const ShiftSpec spec{1.0, 3, 60, 40, 30, 9};
    const auto a = run_benchmark(pool, spec, ms, 2, 3, opt);
    REQUIRE(a.reports.size() == 2 * 3 * 4);
    std::size_t k = 0;
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t t = 0; t < 3; ++t)
        for (Method m : ms) {
          const auto& r = a.reports[k++];
          CHECK(r.source_rep == s);
          CHECK(r.target_rep == t);
          CHECK(r.method == m);
          CHECK(r.model_fingerprint == a.fits[s].model_fingerprint);
          CHECK(r.q_true == a.reports[(k - 1) / 4 * 4].q_true);
        }
    CHECK(a.fits[0].model_fingerprint != a.fits[1].model_fingerprint);

    opt.threads = 3;
    const auto b = run_benchmark(pool, spec, ms, 2, 3, opt);
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
      CHECK(a.reports[i].w_hat == b.reports[i].w_hat);
      CHECK(a.reports[i].mse == b.reports[i].mse);
      CHECK(a.reports[i].acc == b.reports[i].acc);
    }
    CHECK(a.summary[0].count == 6);
  }

  TEST_CASE("benchmark: default repetitions give one hundred reports per method") {
    const Dataset pool = triangle_pool(40);
    BenchmarkOptions opt;
    opt.grid = tiny_grid();
    const std::vector<Method> ms{Method::Bbse, Method::Mlls};
    const auto res = run_benchmark(pool, ShiftSpec{1.0, 3, 24, 12, 12, 4}, ms, 10, 10, opt);
    CHECK(res.reports.size() == 200);
    for (const auto& s : res.summary) CHECK(s.count == 100);
  }

  TEST_CASE("benchmark argument errors") {
    const Dataset pool = triangle_pool(40);
    BenchmarkOptions opt;
    opt.grid = tiny_grid();
    const ShiftSpec spec{1.0, 3, 24, 12, 12, 4};
    CHECK_THROWS_AS(run_benchmark(pool, spec, std::vector<Method>{}, 1, 1, opt), ValidationError);
    CHECK_THROWS_AS(run_benchmark(pool, spec, std::vector<Method>{Method::Bbse}, 0, 1, opt), ValidationError);
  }
}
