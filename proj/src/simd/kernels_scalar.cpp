#include "delaynet/simd/kernels.hpp"

namespace delaynet::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

void axpy_squared(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k] * x[k];
}

void rotate(double* x, double* y, double c, double s, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
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
  if (saturating) {
    for (std::size_t k = 0; k < n; ++k) out[k] = -delta[k] * p[k] + beta * coupled[k] * (1.0 - p[k]);
  } else {
    for (std::size_t k = 0; k < n; ++k) out[k] = -delta[k] * p[k] + beta * coupled[k];
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, "scalar", dot, axpy, axpy_squared, rotate, gemv, sis_rhs};
  return table;
}

}  // namespace delaynet::simd
