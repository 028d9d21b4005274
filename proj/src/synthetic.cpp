#include "labelshift/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "labelshift/error.hpp"
#include "labelshift/klr.hpp"

namespace labelshift {

GaussianMixture GaussianMixture::triangle(double side, double sigma) {
  require(side > 0.0 && sigma > 0.0, "triangle mixture: side and sigma must be positive");
  const double h = side * std::sqrt(3.0) / 2.0;
  return GaussianMixture{Matrix{{0.0, 0.0}, {side, 0.0}, {side / 2.0, h}}, sigma};
}

Matrix GaussianMixture::sample_class(Rng& rng, int c, std::size_t n) const {
  require(c >= 0 && c < num_classes(), "mixture: class out of range");
  Matrix out(n, dim());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim(); ++j)
      out(i, j) = means(static_cast<std::size_t>(c), j) + sigma * rng.normal();
  return out;
}

Dataset GaussianMixture::sample(Rng& rng, std::span<const std::size_t> counts) const {
  require(counts.size() == static_cast<std::size_t>(num_classes()), "mixture: count vector length");
  std::size_t total = 0;
  for (auto c : counts) total += c;
  Dataset ds;
  ds.features = Matrix(total, dim());
  ds.num_classes = num_classes();
  for (std::size_t j = 0; j < dim(); ++j) ds.feature_names.push_back("x" + std::to_string(j + 1));
  for (int c = 0; c < num_classes(); ++c) ds.class_values.push_back(c + 1);
  std::size_t row = 0;
  for (int c = 0; c < num_classes(); ++c) {
    const Matrix block = sample_class(rng, c, counts[static_cast<std::size_t>(c)]);
    for (std::size_t i = 0; i < block.rows(); ++i, ++row) {
      std::copy(block.row(i).begin(), block.row(i).end(), ds.features.row(row).begin());
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset GaussianMixture::sample_with_priors(Rng& rng, std::span<const double> priors,
                                            std::size_t n) const {
  require(priors.size() == static_cast<std::size_t>(num_classes()), "mixture: prior vector length");
  std::vector<std::size_t> counts(priors.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t c = 0;
    for (; c + 1 < priors.size(); ++c) {
      acc += priors[c];
      if (u < acc) break;
    }
    ++counts[c];
  }
  return sample(rng, counts);
}

Vector GaussianMixture::posterior(std::span<const double> x, std::span<const double> priors) const {
  require(x.size() == dim(), "mixture: dimension mismatch");
  const auto m = static_cast<std::size_t>(num_classes());
  Vector logits(m);
  for (std::size_t c = 0; c < m; ++c) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dim(); ++j) {
      const double diff = x[j] - means(c, j);
      sq += diff * diff;
    }
    logits[c] = priors[c] > 0.0 ? std::log(priors[c]) - sq / (2.0 * sigma * sigma) : -1e300;
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  for (auto& v : logits) v -= mx;
  for (auto& v : logits) v = std::max(v, -700.0);
  return softmax_scores(logits);
}

}  // namespace labelshift
