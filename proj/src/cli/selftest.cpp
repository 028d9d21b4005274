#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>

#include "commands.hpp"
#include "labelshift/baselines.hpp"
#include "labelshift/cpm.hpp"
#include "labelshift/klr.hpp"
#include "labelshift/rng.hpp"
#include "labelshift/simd.hpp"

namespace labelshift::cli {

namespace {

using Truncation = std::function<Vector(std::span<const double>, double)>;

Vector truncate_without_renormalization(std::span<const double> p, double t) {
  Vector out(p.begin(), p.end());
  for (double& v : out) v = std::max(v, t);
  return out;
}

bool truncation_hand_case(const Truncation& trunc) {
  const Vector p{0.5, 0.4, 0.1};
  const Vector want{0.44, 0.36, 0.2};
  const Vector got = trunc(p, 0.2);
  for (std::size_t k = 0; k < 3; ++k)
    if (std::abs(got[k] - want[k]) > 1e-12) return false;
  return true;
}

bool truncation_properties(const Truncation& trunc) {
  Rng rng(20240601, "selftest-truncation");
  for (int it = 0; it < 2000; ++it) {
    const std::size_t m = 2 + rng.index(9);
    const Vector p = dirichlet(rng, m, it % 2 == 0 ? 1.0 : 0.2);
    for (double t : {1e-8, 0.01, 1.0 / (2.0 * static_cast<double>(m)) - 1e-6}) {
      const Vector q = trunc(p, t);
      double s = 0.0;
      for (double v : q) s += v;
      if (std::abs(s - 1.0) > 1e-10) return false;
      if (*std::min_element(q.begin(), q.end()) < t) return false;
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
          if (p[a] > p[b] && q[a] < q[b]) return false;
      const Vector qq = trunc(q, t);
      for (std::size_t k = 0; k < m; ++k)
        if (std::abs(qq[k] - q[k]) > 1e-12) return false;
    }
  }
  return true;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

bool klr_gradient_matches_differences() {
  Rng rng(7, "selftest-klr");
  const std::size_t n = 10, d = 2;
  const int m = 3;
  Matrix x(n, d);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
    y[i] = static_cast<int>(i % m);
  }
  const GramMatrix k = self_gram(x, KernelParams(0.5));
  Matrix alpha(n, m - 1);
  for (double& v : alpha.data()) v = rng.normal();
  const double lambda = 0.05;
  const Matrix g = klr_gradient(alpha, k, y, lambda);
  const double h = 1e-6;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < static_cast<std::size_t>(m - 1); ++c) {
      Matrix up = alpha, dn = alpha;
      up(i, c) += h;
      dn(i, c) -= h;
      const double fd = (klr_objective(up, k, y, lambda) - klr_objective(dn, k, y, lambda)) / (2 * h);
      if (rel_err(fd, g(i, c)) > 1e-6) return false;
    }
  return true;
}

MatchProblem random_match_problem(Rng& rng, std::size_t n, std::size_t m) {
  Matrix probs(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector r = truncate_simplex(dirichlet(rng, m, 1.0), 1e-3);
    for (std::size_t k = 0; k < m; ++k) probs(i, k) = r[k];
  }
  return MatchProblem{dirichlet(rng, m, 2.0), ProbMatrix{probs}, 1e-12};
}

bool cpm_gradient_matches_differences() {
  Rng rng(11, "selftest-cpm");
  const MatchProblem prob = random_match_problem(rng, 30, 4);
  Vector w(4);
  for (double& v : w) v = 0.3 + 2.0 * rng.uniform();
  const Vector g = cpm_gradient(prob, w);
  const double h = 1e-6;
  for (std::size_t k = 0; k < w.size(); ++k) {
    Vector up = w, dn = w;
    up[k] += h;
    dn[k] -= h;
    const double fd = (cpm_objective(prob, up) - cpm_objective(prob, dn)) / (2 * h);
    if (rel_err(fd, g[k]) > 1e-6) return false;
  }
  return true;
}

bool cpm_recovers_two_point_ratio() {
  // p(x1|1) = 0.8, p(x1|2) = 0.3, p = (0.5, 0.5), q = (0.7, 0.3): q(x1) = 0.65.
  const Vector post_x1{0.8 / 1.1, 0.3 / 1.1};
  const Vector post_x2{0.2 / 0.9, 0.7 / 0.9};
  Matrix probs(100, 2);
  for (std::size_t i = 0; i < 100; ++i) {
    const Vector& r = i < 65 ? post_x1 : post_x2;
    probs(i, 0) = r[0];
    probs(i, 1) = r[1];
  }
  const CpmSolution sol = cpm_solve(MatchProblem{{0.5, 0.5}, ProbMatrix{probs}, 1e-12});
  return std::hypot(sol.w[0] - 1.4, sol.w[1] - 0.6) <= 1e-6;
}

bool cpm_homogeneity() {
  Rng rng(13, "selftest-homogeneity");
  const MatchProblem prob = random_match_problem(rng, 25, 3);
  const Vector w{0.7, 1.3, 0.4};
  Vector w3 = w;
  for (double& v : w3) v *= 3.0;
  const Vector r = reweighted_target_probs(prob, w);
  const Vector r3 = reweighted_target_probs(prob, w3);
  for (std::size_t k = 0; k < 3; ++k)
    if (std::abs(r3[k] - r[k] / 3.0) > 1e-14) return false;
  return true;
}

bool mlls_likelihood_monotone() {
  Rng rng(17, "selftest-mlls");
  for (int it = 0; it < 10; ++it) {
    const MatchProblem prob = random_match_problem(rng, 40, 3);
    MllsOptions opt;
    opt.record_trace = true;
    const MllsResult res = mlls_em(prob.target_probs, prob.p_hat, opt);
    for (std::size_t k = 1; k < res.log_likelihood.size(); ++k)
      if (res.log_likelihood[k] < res.log_likelihood[k - 1] - 1e-12) return false;
  }
  return true;
}

bool simd_variants_agree() {
  if (!simd::supported(simd::Isa::Avx2)) return true;
  const auto& s = simd::kernels(simd::Isa::Scalar);
  const auto& v = simd::kernels(simd::Isa::Avx2);
  Rng rng(19, "selftest-simd");
  for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 17u, 64u, 101u}) {
    Vector a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    if (std::abs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) > 1e-14 * (1.0 + mag))
      return false;
    // n points in 1..3 dimensions, dimension-major.
    const std::size_t d = 1 + n % 3;
    Vector cols(n * d), x(d), out_s(n), out_v(n);
    for (double& c : cols) c = rng.normal();
    for (double& c : x) c = rng.normal();
    s.sq_dist_row(x.data(), cols.data(), n, d, out_s.data());
    v.sq_dist_row(x.data(), cols.data(), n, d, out_v.data());
    if (out_s != out_v) return false;
  }
  return true;
}

}  // namespace

int run_selftest(std::ostream& out, bool inject_fault) {
  const Truncation trunc = inject_fault ? Truncation(truncate_without_renormalization)
                                        : Truncation([](std::span<const double> p, double t) {
                                            return truncate_simplex(p, t);
                                          });
  const std::pair<const char*, std::function<bool()>> checks[] = {
      {"truncation_hand_case", [&] { return truncation_hand_case(trunc); }},
      {"truncation_properties", [&] { return truncation_properties(trunc); }},
      {"klr_gradient_finite_difference", klr_gradient_matches_differences},
      {"cpm_gradient_finite_difference", cpm_gradient_matches_differences},
      {"cpm_two_point_identifiability", cpm_recovers_two_point_ratio},
      {"cpm_scale_homogeneity", cpm_homogeneity},
      {"mlls_likelihood_monotone", mlls_likelihood_monotone},
      {"simd_variants_agree", simd_variants_agree},
  };
  std::size_t passed = 0;
  for (const auto& [name, check] : checks) {
    bool ok = false;
    try {
      ok = check();
    } catch (const std::exception&) {
      ok = false;
    }
    out << (ok ? "PASS " : "FAIL ") << name << '\n';
    passed += ok ? 1 : 0;
  }
  const std::size_t total = std::size(checks);
  out << "selftest: " << passed << "/" << total << " passed\n";
  return passed == total ? kExitOk : kExitSelftest;
}

}  // namespace labelshift::cli
