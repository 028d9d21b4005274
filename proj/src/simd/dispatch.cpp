#include <atomic>
#include <cstdlib>
#include <string>

#include "labelshift/error.hpp"
#include "labelshift/simd.hpp"

namespace labelshift::simd {
namespace {

const Kernels* pick_default() {
  if (const char* env = std::getenv("LABELSHIFT_SIMD")) {
    const Isa isa = parse_isa(env);
    if (supported(isa)) return &kernels(isa);
  }
  if (supported(Isa::Avx2)) return &kernels(Isa::Avx2);
  return &detail::kScalar;
}

std::atomic<const Kernels*>& slot() {
  static std::atomic<const Kernels*> current{pick_default()};
  return current;
}

}  // namespace

bool supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const Kernels& kernels(Isa isa) {
  require(supported(isa), "SIMD variant not supported on this CPU: " + std::string(name(isa)));
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::Avx2) return detail::kAvx2;
#endif
  return detail::kScalar;
}

const Kernels& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) { slot().store(&kernels(isa), std::memory_order_release); }

std::string_view name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa parse_isa(std::string_view s) {
  if (s == "scalar") return Isa::Scalar;
  if (s == "avx2") return Isa::Avx2;
  throw ValidationError("unknown SIMD variant: " + std::string(s));
}

}  // namespace labelshift::simd
