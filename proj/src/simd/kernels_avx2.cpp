// Compiled with -mavx2 -mfma; only reached through the dispatcher after a
// runtime CPU check.
#include <immintrin.h>

#include "delaynet/simd/kernels.hpp"

namespace delaynet::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
  }
  for (; k + 4 <= n; k += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += alpha * x[k];
}

void axpy_squared(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d vx = _mm256_loadu_pd(x + k);
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(_mm256_mul_pd(va, vx), vx, _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += alpha * x[k] * x[k];
}

void rotate(double* x, double* y, double c, double s, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d vx = _mm256_loadu_pd(x + k);
    const __m256d vy = _mm256_loadu_pd(y + k);
    _mm256_storeu_pd(x + k, _mm256_fmsub_pd(vc, vx, _mm256_mul_pd(vs, vy)));
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(vs, vx, _mm256_mul_pd(vc, vy)));
  }
  for (; k < n; ++k) {
    const double xk = x[k];
    const double yk = y[k];
    x[k] = c * xk - s * yk;
    y[k] = s * xk + c * yk;
  }
}

void gemv(const double* m, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = dot(m + i * n, x, n);
}

void sis_rhs(const double* coupled, const double* p, const double* delta, double beta, double* out,
             std::size_t n, bool saturating) {
  const __m256d vb = _mm256_set1_pd(beta);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d vp = _mm256_loadu_pd(p + k);
    __m256d infect = _mm256_mul_pd(vb, _mm256_loadu_pd(coupled + k));
    if (saturating) infect = _mm256_mul_pd(infect, _mm256_sub_pd(one, vp));
    _mm256_storeu_pd(out + k, _mm256_fnmadd_pd(_mm256_loadu_pd(delta + k), vp, infect));
  }
  for (; k < n; ++k) {
    const double infect = saturating ? beta * coupled[k] * (1.0 - p[k]) : beta * coupled[k];
    out[k] = -delta[k] * p[k] + infect;
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{Isa::Avx2, "avx2", dot, axpy, axpy_squared, rotate, gemv, sis_rhs};
  return &table;
}

}  // namespace delaynet::simd
