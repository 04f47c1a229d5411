#pragma once

// Data-parallel inner loops used by the eigensolver, the matrix-function
// evaluator and the delay integrator. Every kernel has a scalar reference
// implementation; wider variants are chosen at runtime when the CPU supports
// them and must agree with the reference to rounding.

#include <cstddef>
#include <string_view>

namespace delaynet::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  // sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y += alpha * x * x (elementwise square)
  void (*axpy_squared)(double alpha, const double* x, double* y, std::size_t n);
  // (x, y) <- (c x - s y, s x + c y)
  void (*rotate)(double* x, double* y, double c, double s, std::size_t n);
  // y = M x for a row-major n-by-n matrix
  void (*gemv)(const double* m, const double* x, double* y, std::size_t n);
  // out = -delta * p + beta * coupled * (1 - p)   (saturating = true)
  // out = -delta * p + beta * coupled             (saturating = false)
  void (*sis_rhs)(const double* coupled, const double* p, const double* delta, double beta,
                  double* out, std::size_t n, bool saturating);
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in.
const KernelTable* avx2_kernels();

bool isa_supported(Isa isa);
// Kernel table for a specific ISA; throws std::invalid_argument if unsupported.
const KernelTable& kernels_for(Isa isa);

// Active table. Defaults to the widest supported ISA unless DELAYNET_ISA
// (scalar|avx2) is set in the environment.
const KernelTable& kernels();
Isa active_isa();
void set_active_isa(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace delaynet::simd
