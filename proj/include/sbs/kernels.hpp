#pragma once

#include <cmath>
#include <cstddef>

#include "sbs/types.hpp"

// Dense row-major kernels for the small matrices on the sampling hot path.
// Plain loops keep the cost exactly proportional to the flop count, which
// the D-scaling checks rely on. Complex products are spelled out to avoid
// the IEEE inf/nan recovery path of operator*.

namespace sbs::kernels {

/// c (m x n) = a (m x k) * b (k x n). c must not alias a or b.
inline void gemm(const cplx* a, const cplx* b, cplx* c, int m, int k, int n) {
  for (int i = 0; i < m * n; ++i) c[i] = 0.0;
  for (int i = 0; i < m; ++i) {
    cplx* ci = c + static_cast<std::ptrdiff_t>(i) * n;
    const cplx* ai = a + static_cast<std::ptrdiff_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const cplx s = ai[l];
      const cplx* bl = b + static_cast<std::ptrdiff_t>(l) * n;
      const double sr = s.real(), si = s.imag();
      for (int j = 0; j < n; ++j) {
        const double br = bl[j].real(), bi = bl[j].imag();
        ci[j] += cplx(sr * br - si * bi, sr * bi + si * br);
      }
    }
  }
}

/// tr(a * b) for a (m x k) and b (k x m).
inline cplx trace_product(const cplx* a, const cplx* b, int m, int k) {
  double re = 0.0, im = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const cplx x = a[i * k + l], y = b[l * m + i];
      re += x.real() * y.real() - x.imag() * y.imag();
      im += x.real() * y.imag() + x.imag() * y.real();
    }
  }
  return {re, im};
}

/// 1 / z by Smith's scaling. z must be nonzero and finite.
inline cplx reciprocal(cplx z) {
  const double a = z.real(), b = z.imag();
  if (std::abs(a) >= std::abs(b)) {
    const double r = b / a, den = a + b * r;
    return {1.0 / den, -r / den};
  }
  const double r = a / b, den = a * r + b;
  return {r / den, -1.0 / den};
}

inline void set_identity(cplx* a, int n) {
  for (int i = 0; i < n * n; ++i) a[i] = 0.0;
  for (int i = 0; i < n; ++i) a[i * n + i] = 1.0;
}

}  // namespace sbs::kernels
