#pragma once

// Data-parallel inner loops of the Monte Carlo evaluator.
//
// Every kernel has a portable scalar reference in `kernels::scalar` and, on
// x86-64, an AVX2+FMA variant in `kernels::avx2`. The unqualified entry points
// dispatch once per process to the best variant the CPU supports.
//
// Complex data is std::complex<double> (interleaved re/im). Matrices are
// column-major with leading dimension equal to the row count.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace leorsma::kernels {

using cplx = std::complex<double>;

enum class Backend { Scalar, Avx2 };

/// Backend currently used by the dispatching entry points.
Backend active_backend();
/// Whether the running CPU can execute the AVX2 variants.
bool avx2_available();
/// Forces a backend. Selecting Avx2 on a CPU without it throws.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

/// sum_i conj(a[i]) * b[i]
cplx cdot(std::span<const cplx> a, std::span<const cplx> b);

/// out = A^H A for column-major A (rows x cols); out is cols x cols column-major.
void gram(std::span<const cplx> a, std::size_t rows, std::size_t cols, std::span<cplx> out);

/// out[i] = los_scale * los[i] + nlos_scale * nlos_std[i] * w[i]
void rician_mix(std::span<const cplx> los, double los_scale, std::span<const double> nlos_std,
                std::span<const cplx> w, double nlos_scale, std::span<cplx> out);

namespace scalar {
cplx cdot(std::span<const cplx> a, std::span<const cplx> b);
void gram(std::span<const cplx> a, std::size_t rows, std::size_t cols, std::span<cplx> out);
void rician_mix(std::span<const cplx> los, double los_scale, std::span<const double> nlos_std,
                std::span<const cplx> w, double nlos_scale, std::span<cplx> out);
}  // namespace scalar

#ifndef LEORSMA_HAVE_AVX2_KERNELS
#if defined(__x86_64__) || defined(_M_X64)
#define LEORSMA_HAVE_AVX2_KERNELS 1
#else
#define LEORSMA_HAVE_AVX2_KERNELS 0
#endif
#endif

#if LEORSMA_HAVE_AVX2_KERNELS
namespace avx2 {
cplx cdot(std::span<const cplx> a, std::span<const cplx> b);
void gram(std::span<const cplx> a, std::size_t rows, std::size_t cols, std::span<cplx> out);
void rician_mix(std::span<const cplx> los, double los_scale, std::span<const double> nlos_std,
                std::span<const cplx> w, double nlos_scale, std::span<cplx> out);
}  // namespace avx2
#endif

}  // namespace leorsma::kernels
