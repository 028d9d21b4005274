#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "labelshift/matrix.hpp"

namespace labelshift {

// Evaluates f(x) and writes the gradient into `grad`.
using ObjectiveFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  std::size_t memory = 10;
  std::size_t max_iterations = 1000;
  double pg_tolerance = 1e-8;          // sup-norm of the projected gradient
  double decrease_tolerance = 0.0;     // stop once f_k - f_{k+1} <= this; 0 disables
  std::size_t max_line_search = 60;
  bool record_trace = false;
};

enum class LbfgsStatus { GradientTolerance, ObjectiveDecrease, MaxIterations, LineSearchFailed };
std::string_view to_string(LbfgsStatus s);

struct LbfgsResult {
  Vector x;
  double f = 0.0;
  Vector grad;
  double pg_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
  std::vector<double> trace;  // objective at x0 and at every accepted iterate
};

/// Limited-memory BFGS with simple bounds lower <= x <= upper.
///
/// Variables sitting on a bound with the gradient pushing outward are frozen for
/// the iteration; the two-loop recursion runs over the remaining free
/// coordinates and a backtracking Armijo search follows the projected path.
/// Empty `lower`/`upper` mean unbounded; individual entries may be +-infinity.
///
/// Throws NumericalError if f(x0) is not finite.
LbfgsResult minimize_box(const ObjectiveFn& fn, Vector x0, const Vector& lower,
                         const Vector& upper, const LbfgsOptions& options = {});

// Evaluates f(x), its gradient, and H0 * gradient for a fixed symmetric positive
// semidefinite H0 (an initial inverse-Hessian guess).
using PreconditionedFn =
    std::function<double(std::span<const double> x, std::span<double> grad, std::span<double> h0_grad)>;

/// Unconstrained L-BFGS whose two-loop recursion starts from H0 instead of a
/// multiple of the identity. H0 is only ever applied through `fn`, by linearity:
/// H0 (g' - g) = h0_grad' - h0_grad. Stops on the sup-norm of the gradient.
LbfgsResult minimize_preconditioned(const PreconditionedFn& fn, Vector x0, const LbfgsOptions& options = {});

}  // namespace labelshift
