#include <atomic>
#include <stdexcept>

#include "leorsma/kernels.hpp"

namespace leorsma::kernels {

namespace {

bool detect_avx2() {
#if LEORSMA_HAVE_AVX2_KERNELS && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{detect_avx2() ? Backend::Avx2 : Backend::Scalar};
  return slot;
}

}  // namespace

bool avx2_available() {
  static const bool available = detect_avx2();
  return available;
}

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (backend == Backend::Avx2 && !avx2_available()) {
    throw std::runtime_error("AVX2 kernels requested but the CPU does not support AVX2+FMA");
  }
  backend_slot().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

cplx cdot(std::span<const cplx> a, std::span<const cplx> b) {
#if LEORSMA_HAVE_AVX2_KERNELS
  if (active_backend() == Backend::Avx2) return avx2::cdot(a, b);
#endif
  return scalar::cdot(a, b);
}

void gram(std::span<const cplx> a, std::size_t rows, std::size_t cols, std::span<cplx> out) {
#if LEORSMA_HAVE_AVX2_KERNELS
  if (active_backend() == Backend::Avx2) return avx2::gram(a, rows, cols, out);
#endif
  scalar::gram(a, rows, cols, out);
}

void rician_mix(std::span<const cplx> los, double los_scale, std::span<const double> nlos_std,
                std::span<const cplx> w, double nlos_scale, std::span<cplx> out) {
#if LEORSMA_HAVE_AVX2_KERNELS
  if (active_backend() == Backend::Avx2) {
    return avx2::rician_mix(los, los_scale, nlos_std, w, nlos_scale, out);
  }
#endif
  scalar::rician_mix(los, los_scale, nlos_std, w, nlos_scale, out);
}

}  // namespace leorsma::kernels
