#include "labelshift/lbfgsb.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "labelshift/error.hpp"

namespace labelshift {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;

struct Pair {
  Vector s;
  Vector y;
  double rho;
};

double masked_dot(const Vector& a, const Vector& b, const std::vector<char>& free) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (free[i]) s += a[i] * b[i];
  return s;
}

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::string_view to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::GradientTolerance: return "gradient_tolerance";
    case LbfgsStatus::ObjectiveDecrease: return "objective_decrease";
    case LbfgsStatus::MaxIterations: return "max_iterations";
    case LbfgsStatus::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

LbfgsResult minimize_box(const ObjectiveFn& fn, Vector x0, const Vector& lower_in,
                         const Vector& upper_in, const LbfgsOptions& opt) {
  const std::size_t n = x0.size();
  const Vector lower = lower_in.empty() ? Vector(n, -kInf) : lower_in;
  const Vector upper = upper_in.empty() ? Vector(n, kInf) : upper_in;
  require(lower.size() == n && upper.size() == n, "minimize_box: bound size mismatch");
  for (std::size_t i = 0; i < n; ++i) require(lower[i] <= upper[i], "minimize_box: empty box");

  auto project = [&](Vector& v) {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i], lower[i], upper[i]);
  };

  LbfgsResult res;
  Vector x = std::move(x0);
  project(x);
  Vector g(n);
  double f = fn(x, g);
  ++res.evaluations;
  if (!std::isfinite(f)) throw NumericalError("minimize_box: objective is not finite at the start point");
  if (opt.record_trace) res.trace.push_back(f);

  std::deque<Pair> memory;
  std::vector<char> free(n, 1);
  Vector d(n), xn(n), gn(n), q(n);
  std::vector<double> alpha_hist;

  auto projected_grad_norm = [&]() {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double step = std::clamp(x[i] - g[i], lower[i], upper[i]) - x[i];
      m = std::max(m, std::abs(step));
    }
    return m;
  };

  res.status = LbfgsStatus::MaxIterations;
  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    res.pg_norm = projected_grad_norm();
    if (res.pg_norm <= opt.pg_tolerance) {
      res.status = LbfgsStatus::GradientTolerance;
      break;
    }
    for (std::size_t i = 0; i < n; ++i)
      free[i] = !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0));

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) memory.clear();
      // Two-loop recursion on the free coordinates.
      for (std::size_t i = 0; i < n; ++i) q[i] = free[i] ? g[i] : 0.0;
      alpha_hist.assign(memory.size(), 0.0);
      for (std::size_t k = memory.size(); k-- > 0;) {
        alpha_hist[k] = memory[k].rho * masked_dot(memory[k].s, q, free);
        for (std::size_t i = 0; i < n; ++i)
          if (free[i]) q[i] -= alpha_hist[k] * memory[k].y[i];
      }
      double scale = 1.0;
      if (!memory.empty()) {
        const Pair& last = memory.back();
        scale = dot(last.s, last.y) / dot(last.y, last.y);
      }
      for (std::size_t i = 0; i < n; ++i) q[i] *= scale;
      for (std::size_t k = 0; k < memory.size(); ++k) {
        const double beta = memory[k].rho * masked_dot(memory[k].y, q, free);
        for (std::size_t i = 0; i < n; ++i)
          if (free[i]) q[i] += (alpha_hist[k] - beta) * memory[k].s[i];
      }
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = free[i] ? -q[i] : 0.0;
        // Do not walk out through a bound the iterate already sits on.
        if ((x[i] <= lower[i] && d[i] < 0.0) || (x[i] >= upper[i] && d[i] > 0.0)) d[i] = 0.0;
      }
      if (dot(g, d) >= 0.0) {
        if (attempt == 0) continue;
        break;
      }

      double step = 1.0;
      if (memory.empty()) {
        double dmax = 0.0;
        for (double v : d) dmax = std::max(dmax, std::abs(v));
        step = std::min(1.0, 1.0 / dmax);
      }
      for (std::size_t ls = 0; ls < opt.max_line_search; ++ls, step *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
        project(xn);
        double gd = 0.0;
        for (std::size_t i = 0; i < n; ++i) gd += g[i] * (xn[i] - x[i]);
        if (gd >= 0.0) continue;
        const double fn_val = fn(xn, gn);
        ++res.evaluations;
        if (std::isfinite(fn_val) && fn_val <= f + kArmijo * gd) {
          Pair p{Vector(n), Vector(n), 0.0};
          for (std::size_t i = 0; i < n; ++i) {
            p.s[i] = xn[i] - x[i];
            p.y[i] = gn[i] - g[i];
          }
          const double sy = dot(p.s, p.y);
          if (sy > 1e-12 * dot(p.y, p.y) && sy > 0.0) {
            p.rho = 1.0 / sy;
            memory.push_back(std::move(p));
            if (memory.size() > opt.memory) memory.pop_front();
          }
          const double decrease = f - fn_val;
          x.swap(xn);
          g.swap(gn);
          f = fn_val;
          if (opt.record_trace) res.trace.push_back(f);
          accepted = true;
          if (opt.decrease_tolerance > 0.0 && decrease <= opt.decrease_tolerance)
            res.status = LbfgsStatus::ObjectiveDecrease;
          break;
        }
      }
    }
    if (!accepted) {
      res.status = LbfgsStatus::LineSearchFailed;
      break;
    }
    if (res.status == LbfgsStatus::ObjectiveDecrease) {
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.pg_norm = projected_grad_norm();
  if (res.status == LbfgsStatus::MaxIterations && res.pg_norm <= opt.pg_tolerance)
    res.status = LbfgsStatus::GradientTolerance;
  res.x = std::move(x);
  res.grad = std::move(g);
  res.f = f;
  return res;
}

LbfgsResult minimize_preconditioned(const PreconditionedFn& fn, Vector x0, const LbfgsOptions& opt) {
  const std::size_t n = x0.size();
  struct HPair {
    Vector s, y, hy;
    double rho;
  };
  auto sup = [](const Vector& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  };

  LbfgsResult res;
  Vector x = std::move(x0), g(n), h(n);
  double f = fn(x, g, h);
  ++res.evaluations;
  if (!std::isfinite(f)) throw NumericalError("minimize_preconditioned: objective is not finite at the start point");
  if (opt.record_trace) res.trace.push_back(f);

  std::deque<HPair> memory;
  Vector q(n), r(n), d(n), xn(n), gn(n), hn(n);
  std::vector<double> alpha_hist;
  res.status = LbfgsStatus::MaxIterations;
  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    res.pg_norm = sup(g);
    if (res.pg_norm <= opt.pg_tolerance) {
      res.status = LbfgsStatus::GradientTolerance;
      break;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) memory.clear();
      // q tracks the working gradient, r tracks H0 q.
      q = g;
      r = h;
      alpha_hist.assign(memory.size(), 0.0);
      for (std::size_t k = memory.size(); k-- > 0;) {
        alpha_hist[k] = memory[k].rho * dot(memory[k].s, q);
        for (std::size_t i = 0; i < n; ++i) {
          q[i] -= alpha_hist[k] * memory[k].y[i];
          r[i] -= alpha_hist[k] * memory[k].hy[i];
        }
      }
      if (!memory.empty()) {
        const HPair& last = memory.back();
        const double scale = dot(last.s, last.y) / dot(last.y, last.hy);
        for (double& v : r) v *= scale;
      }
      for (std::size_t k = 0; k < memory.size(); ++k) {
        const double beta = memory[k].rho * dot(memory[k].y, r);
        for (std::size_t i = 0; i < n; ++i) r[i] += (alpha_hist[k] - beta) * memory[k].s[i];
      }
      for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
      const double gd = dot(g, d);
      if (!(gd < 0.0)) continue;

      double step = 1.0;
      for (std::size_t ls = 0; ls < opt.max_line_search; ++ls, step *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
        const double fn_val = fn(xn, gn, hn);
        ++res.evaluations;
        if (std::isfinite(fn_val) && fn_val <= f + kArmijo * step * gd) {
          HPair p{Vector(n), Vector(n), Vector(n), 0.0};
          for (std::size_t i = 0; i < n; ++i) {
            p.s[i] = xn[i] - x[i];
            p.y[i] = gn[i] - g[i];
            p.hy[i] = hn[i] - h[i];
          }
          const double sy = dot(p.s, p.y), yhy = dot(p.y, p.hy);
          if (sy > 0.0 && yhy > 0.0 && sy > 1e-12 * yhy) {
            p.rho = 1.0 / sy;
            memory.push_back(std::move(p));
            if (memory.size() > opt.memory) memory.pop_front();
          }
          const double decrease = f - fn_val;
          x.swap(xn);
          g.swap(gn);
          h.swap(hn);
          f = fn_val;
          if (opt.record_trace) res.trace.push_back(f);
          accepted = true;
          if (opt.decrease_tolerance > 0.0 && decrease <= opt.decrease_tolerance)
            res.status = LbfgsStatus::ObjectiveDecrease;
          break;
        }
      }
    }
    if (!accepted) {
      res.status = LbfgsStatus::LineSearchFailed;
      break;
    }
    if (res.status == LbfgsStatus::ObjectiveDecrease) {
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.pg_norm = sup(g);
  if (res.status != LbfgsStatus::GradientTolerance && res.pg_norm <= opt.pg_tolerance)
    res.status = LbfgsStatus::GradientTolerance;
  res.x = std::move(x);
  res.grad = std::move(g);
  res.f = f;
  return res;
}

}  // namespace labelshift
