#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "delaynet/linalg.hpp"

namespace delaynet {

struct JacobiOptions {
  // Stop once the off-diagonal Frobenius norm falls below this fraction of
  // the matrix's Frobenius norm.
  double off_diagonal_tolerance = 1e-13;
  int max_sweeps = 100;
  // Relative asymmetry accepted on input.
  double symmetry_tolerance = 1e-12;
};

// Full symmetric eigendecomposition. Eigenvalues ascend; eigenvector i is
// stored as row i of `basis` so that kernels can stream it contiguously.
// Each eigenvector's largest-magnitude component is nonnegative.
struct EigenDecomposition {
  std::vector<double> values;
  Matrix basis;  // row i = q_i

  std::size_t size() const { return values.size(); }
  std::span<const double> vector(std::size_t i) const { return basis.row(i); }
  // Q with eigenvectors as columns.
  Matrix vectors() const { return transpose(basis); }
};

// Cyclic Jacobi rotations. Throws InputError for non-square or asymmetric
// input and ConvergenceError when the sweep cap is reached.
EigenDecomposition eigendecompose(const Matrix& m, const JacobiOptions& options = {});

// The symmetric system matrix beta*A - Delta together with its cached
// eigendecomposition. Immutable once built.
class SystemMatrix {
 public:
  static SystemMatrix from_matrix(Matrix m, const JacobiOptions& options = {});

  const Matrix& matrix() const { return matrix_; }
  const EigenDecomposition& eigen() const { return eigen_; }
  std::span<const double> eigenvalues() const { return eigen_.values; }
  std::size_t size() const { return matrix_.rows(); }
  double lambda_min() const { return eigen_.values.front(); }
  double lambda_max() const { return eigen_.values.back(); }

 private:
  SystemMatrix(Matrix m, EigenDecomposition e) : matrix_(std::move(m)), eigen_(std::move(e)) {}
  Matrix matrix_;
  EigenDecomposition eigen_;
};

using ScalarFunction = std::function<double(double)>;

// Q diag(f(lambda_i)) Q^T, symmetric to the bit. Throws SingularityError if f
// is not finite at some eigenvalue.
Matrix matrix_function(const EigenDecomposition& eigen, const ScalarFunction& f);
Matrix matrix_function(const SystemMatrix& m, const ScalarFunction& f);

// Only the diagonal of matrix_function: sum_k f(lambda_k) q_k[i]^2.
std::vector<double> matrix_function_diagonal(const EigenDecomposition& eigen, const ScalarFunction& f);

// Width of the band around a singularity inside which matrix functions refuse
// to evaluate.
inline constexpr double kSingularityGuard = 1e-9;

// Throws SingularityError if |value| <= kSingularityGuard.
void require_clear_of_singularity(double value, const char* what);

inline constexpr double kDefaultEpsilon = 0.01;

struct StabilityReport {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double epsilon = kDefaultEpsilon;
  double tau = 0.0;
  double delay_bound = std::numeric_limits<double>::infinity();  // pi / (2 tau)
  bool stable = false;
  double margin_upper = 0.0;  // -epsilon - lambda_max
  double margin_lower = 0.0;  // lambda_min + pi / (2 tau)

  bool upper_holds() const { return margin_upper >= 0.0; }
  bool lower_holds() const { return margin_lower >= 0.0; }
};

// Spectral box test: epsilon I <= -A <= pi/(2 tau) I.
// Throws InputError for epsilon <= 0 or tau < 0.
StabilityReport check_stability(const SystemMatrix& m, double tau, double epsilon = kDefaultEpsilon);
StabilityReport check_stability(std::span<const double> eigenvalues, double tau, double epsilon = kDefaultEpsilon);

// pi / (2 tau), +inf for tau == 0.
double delay_bound(double tau);

}  // namespace delaynet
