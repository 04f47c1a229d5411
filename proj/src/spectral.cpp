#include "delaynet/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "delaynet/errors.hpp"
#include "delaynet/simd/kernels.hpp"

namespace delaynet {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.rows(); ++p)
    for (std::size_t q = p + 1; q < a.cols(); ++q) s += a(p, q) * a(p, q);
  return std::sqrt(2.0 * s);
}

// One Jacobi rotation annihilating a(p, q). Rows p and q are rotated with the
// vector kernel; the symmetric partner columns are mirrored afterwards and the
// 2x2 pivot block is set from the closed-form update.
void rotate_pivot(Matrix& a, Matrix& basis, std::size_t p, std::size_t q, const simd::KernelTable& k) {
  const double apq = a(p, q);
  const double app = a(p, p);
  const double aqq = a(q, q);
  const double theta = (aqq - app) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const std::size_t n = a.rows();

  k.rotate(a.row(p).data(), a.row(q).data(), c, s, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    a(r, p) = a(p, r);
    a(r, q) = a(q, r);
  }
  a(p, p) = app - t * apq;
  a(q, q) = aqq + t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  k.rotate(basis.row(p).data(), basis.row(q).data(), c, s, n);
}

}  // namespace

EigenDecomposition eigendecompose(const Matrix& m, const JacobiOptions& options) {
  if (!m.square()) throw InputError("eigendecompose: matrix is not square");
  const std::size_t n = m.rows();
  const double scale = max_abs(m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(m(i, j))) throw InputError("eigendecompose: non-finite entry");
      if (std::abs(m(i, j) - m(j, i)) > options.symmetry_tolerance * scale)
        throw InputError("eigendecompose: matrix is not symmetric");
    }

  Matrix a = m;
  symmetrize(a);
  Matrix basis = Matrix::identity(n);
  const auto& k = simd::kernels();

  const double target = options.off_diagonal_tolerance * std::max(norm_frobenius(a), 1e-300);
  int sweep = 0;
  while (off_diagonal_norm(a) > target) {
    if (sweep++ >= options.max_sweeps) throw ConvergenceError("eigendecompose: Jacobi sweep cap reached");
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        if (a(p, q) != 0.0) rotate_pivot(a, basis, p, q, k);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    auto src = basis.row(order[i]);
    auto dst = out.basis.row(i);
    std::size_t big = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (std::abs(src[j]) > std::abs(src[big])) big = j;
    const double sign = src[big] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) dst[j] = sign * src[j];
  }
  return out;
}

SystemMatrix SystemMatrix::from_matrix(Matrix m, const JacobiOptions& options) {
  auto e = eigendecompose(m, options);
  symmetrize(m);
  return SystemMatrix(std::move(m), std::move(e));
}

Matrix matrix_function(const EigenDecomposition& eigen, const ScalarFunction& f) {
  const std::size_t n = eigen.size();
  const auto& k = simd::kernels();
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = f(eigen.values[i]);
    if (!std::isfinite(fi)) throw SingularityError("matrix function not finite at an eigenvalue");
    if (fi == 0.0) continue;
    const auto q = eigen.vector(i);
    for (std::size_t a = 0; a < n; ++a) {
      if (q[a] != 0.0) k.axpy(fi * q[a], q.data(), r.row(a).data(), n);
    }
  }
  symmetrize(r);
  return r;
}

Matrix matrix_function(const SystemMatrix& m, const ScalarFunction& f) { return matrix_function(m.eigen(), f); }

std::vector<double> matrix_function_diagonal(const EigenDecomposition& eigen, const ScalarFunction& f) {
  const std::size_t n = eigen.size();
  const auto& k = simd::kernels();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = f(eigen.values[i]);
    if (!std::isfinite(fi)) throw SingularityError("matrix function not finite at an eigenvalue");
    k.axpy_squared(fi, eigen.vector(i).data(), d.data(), n);
  }
  return d;
}

void require_clear_of_singularity(double value, const char* what) {
  if (!(std::abs(value) > kSingularityGuard)) throw SingularityError(std::string("singular: ") + what);
}

double delay_bound(double tau) {
  return tau > 0.0 ? std::numbers::pi / (2.0 * tau) : std::numeric_limits<double>::infinity();
}

StabilityReport check_stability(std::span<const double> eigenvalues, double tau, double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw InputError("tau must be finite and nonnegative");
  if (eigenvalues.empty()) throw InputError("empty spectrum");
  StabilityReport r;
  r.lambda_min = *std::min_element(eigenvalues.begin(), eigenvalues.end());
  r.lambda_max = *std::max_element(eigenvalues.begin(), eigenvalues.end());
  r.epsilon = epsilon;
  r.tau = tau;
  r.delay_bound = delay_bound(tau);
  r.margin_upper = -epsilon - r.lambda_max;
  r.margin_lower = r.lambda_min + r.delay_bound;
  r.stable = r.lambda_max <= -epsilon && r.lambda_min >= -r.delay_bound;
  return r;
}

StabilityReport check_stability(const SystemMatrix& m, double tau, double epsilon) {
  return check_stability(m.eigenvalues(), tau, epsilon);
}

}  // namespace delaynet
