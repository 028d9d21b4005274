#pragma once

#include <span>

#include "labelshift/dataset.hpp"
#include "labelshift/rng.hpp"

namespace labelshift {

/// Isotropic Gaussian class-conditionals N(mean_c, sigma^2 I) with closed-form
/// posteriors, used as ground truth in tests and the simulate command.
struct GaussianMixture {
  Matrix means;  // M x d
  double sigma = 1.0;

  int num_classes() const { return static_cast<int>(means.rows()); }
  std::size_t dim() const { return means.cols(); }

  // Three classes in the plane at the vertices of an equilateral triangle
  // with side length `side`.
  static GaussianMixture triangle(double side, double sigma);

  Matrix sample_class(Rng& rng, int c, std::size_t n) const;
  // counts[c] points of class c, classes in order.
  Dataset sample(Rng& rng, std::span<const std::size_t> counts) const;
  // n points with labels drawn from `priors`.
  Dataset sample_with_priors(Rng& rng, std::span<const double> priors, std::size_t n) const;
  Vector posterior(std::span<const double> x, std::span<const double> priors) const;
};

}  // namespace labelshift
