#pragma once

// Portable random streams. The engine is std::mt19937_64 seeded through
// std::seed_seq, both of which the standard pins down exactly. The
// distributions below are hand-written because the std:: ones are
// implementation-defined, and scenarios must replay bit-exactly everywhere.
//
// Every logical consumer gets its own stream, derived from the run seed, a
// purpose name, and up to a few integer ids (repetition indices, class ids).

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

#include "labelshift/matrix.hpp"

namespace labelshift {

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t h = 14695981039346656037ull);

class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream, std::initializer_list<std::uint64_t> ids = {});

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // Uniform on (0, 1).
  double uniform_open();
  // Uniform integer in [0, n), n >= 1.
  std::size_t index(std::size_t n);
  double normal();
  // Gamma(shape, 1).
  double gamma(double shape);

  template <class T>
  void shuffle(std::span<T> v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// Dirichlet(alpha * 1_k) via normalized Gamma(alpha, 1) draws.
Vector dirichlet(Rng& rng, std::size_t k, double alpha);

}  // namespace labelshift
