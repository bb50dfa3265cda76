// Compiled with -mavx2 -mfma; only reached through the runtime dispatcher.
#include "leorsma/kernels.hpp"

#include <cassert>
#include <immintrin.h>

namespace leorsma::kernels::avx2 {

namespace {

inline const double* raw(const cplx* p) { return reinterpret_cast<const double*>(p); }
inline double* raw(cplx* p) { return reinterpret_cast<double*>(p); }

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

cplx cdot(std::span<const cplx> a, std::span<const cplx> b) {
  assert(a.size() == b.size());
  const std::size_t n = a.size();
  // acc_rr lanes: (ar*br, ai*bi); acc_ri lanes: (ar*bi, ai*br)
  __m256d acc_rr = _mm256_setzero_pd();
  __m256d acc_ri = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(raw(a.data() + i));
    const __m256d vb = _mm256_loadu_pd(raw(b.data() + i));
    acc_rr = _mm256_fmadd_pd(va, vb, acc_rr);
    acc_ri = _mm256_fmadd_pd(va, _mm256_permute_pd(vb, 0b0101), acc_ri);
  }
  double re = hsum(acc_rr);
  alignas(32) double t[4];
  _mm256_store_pd(t, acc_ri);
  double im = (t[0] - t[1]) + (t[2] - t[3]);
  for (; i < n; ++i) {
    re += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    im += a[i].real() * b[i].imag() - a[i].imag() * b[i].real();
  }
  return {re, im};
}

void gram(std::span<const cplx> a, std::size_t rows, std::size_t cols, std::span<cplx> out) {
  assert(a.size() >= rows * cols && out.size() >= cols * cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const auto cj = a.subspan(j * rows, rows);
    for (std::size_t i = 0; i <= j; ++i) {
      const cplx v = cdot(a.subspan(i * rows, rows), cj);
      out[j * cols + i] = v;
      out[i * cols + j] = std::conj(v);
    }
    out[j * cols + j] = {out[j * cols + j].real(), 0.0};
  }
}

void rician_mix(std::span<const cplx> los, double los_scale, std::span<const double> nlos_std,
                std::span<const cplx> w, double nlos_scale, std::span<cplx> out) {
  assert(los.size() == out.size() && w.size() == out.size() && nlos_std.size() == out.size());
  const std::size_t n = out.size();
  const __m256d vlos = _mm256_set1_pd(los_scale);
  const __m256d vnlos = _mm256_set1_pd(nlos_scale);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // (s0, s0, s1, s1)
    const __m128d s = _mm_loadu_pd(nlos_std.data() + i);
    const __m256d sd = _mm256_permute4x64_pd(_mm256_castpd128_pd256(s), 0b01010000);
    const __m256d scale = _mm256_mul_pd(vnlos, sd);
    const __m256d l = _mm256_mul_pd(vlos, _mm256_loadu_pd(raw(los.data() + i)));
    _mm256_storeu_pd(raw(out.data() + i),
                     _mm256_fmadd_pd(scale, _mm256_loadu_pd(raw(w.data() + i)), l));
  }
  for (; i < n; ++i) {
    out[i] = los_scale * los[i] + (nlos_scale * nlos_std[i]) * w[i];
  }
}

}  // namespace leorsma::kernels::avx2
