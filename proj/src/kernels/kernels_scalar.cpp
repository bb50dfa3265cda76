#include "leorsma/kernels.hpp"

#include <cassert>

namespace leorsma::kernels::scalar {

cplx cdot(std::span<const cplx> a, std::span<const cplx> b) {
  assert(a.size() == b.size());
  double re = 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
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
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = los_scale * los[i] + (nlos_scale * nlos_std[i]) * w[i];
  }
}

}  // namespace leorsma::kernels::scalar
