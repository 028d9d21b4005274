#include "labelshift/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "labelshift/error.hpp"

namespace labelshift {

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t h) {
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(std::as_bytes(std::span(s.data(), s.size()))); }

Rng::Rng(std::uint64_t seed, std::string_view stream, std::initializer_list<std::uint64_t> ids) {
  std::vector<std::uint32_t> words;
  auto push64 = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push64(seed);
  push64(fnv1a64(stream));
  for (auto id : ids) push64(id);
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

double Rng::uniform_open() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

std::size_t Rng::index(std::size_t n) {
  require(n > 0, "Rng::index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = next();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

double Rng::normal() {
  // Marsaglia polar method; the second variate is dropped to keep the stream stateless.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

double Rng::gamma(double shape) {
  require(std::isfinite(shape) && shape > 0.0, "gamma shape must be positive");
  if (shape == 1.0) return -std::log(uniform_open());
  if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform_open(), 1.0 / shape);
  // Marsaglia & Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

Vector dirichlet(Rng& rng, std::size_t k, double alpha) {
  require(k > 0, "dirichlet: empty support");
  Vector out(k);
  double total = 0.0;
  for (auto& v : out) {
    v = rng.gamma(alpha);
    total += v;
  }
  if (total <= 0.0) {
    // Every draw underflowed (tiny alpha); fall back to a uniformly chosen vertex.
    std::fill(out.begin(), out.end(), 0.0);
    out[rng.index(k)] = 1.0;
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace labelshift
