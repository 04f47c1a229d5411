#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "delaynet/linalg.hpp"
#include "delaynet/spectral.hpp"

namespace delaynet {

// Modeling error injects sigma_i * white noise directly into node i
// (input matrix diag(sigma)); testing error perturbs the measured states, so
// the noise passes through the system matrix (input matrix A diag(sigma)).
enum class NoiseKind { ModelingError, TestingError };

std::string_view to_string(NoiseKind kind);
// Accepts "model"/"modeling" and "test"/"testing". Throws InputError.
NoiseKind parse_noise_kind(std::string_view text);

struct NoiseModel {
  NoiseKind kind = NoiseKind::ModelingError;
  std::vector<double> sigma;
};

// The noise input matrix for `noise` on system `m`.
Matrix noise_input_matrix(const SystemMatrix& m, const NoiseModel& noise);

struct PerformanceValue {
  double rho_ss = 0.0;
  std::vector<double> per_mode;  // one summand per eigenvalue, ascending order
};

// Throws StabilityError unless every eigenvalue satisfies
// -pi/(2 tau) < lambda < 0 clear of the singularity guard.
void require_performance_defined(std::span<const double> eigenvalues, double tau);

// -cos(lambda tau) / (2 lambda (1 + sin(lambda tau))): the steady-state
// variance contributed by a unit-intensity mode with eigenvalue lambda.
double mode_gain(double lambda, double tau);

// Closed-form steady-state output variance of the delayed linear network
// driven by the given white noise.
PerformanceValue performance_closed_form(const SystemMatrix& m, const NoiseModel& noise, double tau);

struct FrequencyOracleOptions {
  double omega_max = 0.0;  // 0 selects 1e3 * max(|lambda|max, 1/tau)
  double relative_tolerance = 1e-10;
  int max_depth = 48;
};

// Direct quadrature of (1/2pi) int Tr[G(jw)^H G(jw)] dw with
// G(s) = (sI - e^{-tau s} A)^{-1} B, solving the complex resolvent at every
// sample. Throws ConvergenceError when the quadrature or the truncated tail
// cannot meet the tolerance.
double performance_frequency_oracle(const SystemMatrix& m, const NoiseModel& noise, double tau,
                                    const FrequencyOracleOptions& options = {});

struct CentralityVector {
  std::vector<double> eta;
  NoiseKind kind = NoiseKind::ModelingError;
  double tau = 0.0;
};

// eta_i = d rho_ss / d sigma_i^2, i.e. the diagonal of
//   -1/2 A^{-1} cos(tau A) (I + sin(tau A))^{-1}   (modeling error)
//   -1/2 A     cos(tau A) (I + sin(tau A))^{-1}   (testing error)
CentralityVector centrality(const SystemMatrix& m, NoiseKind kind, double tau);

// Smooth surrogate of rho_ss that is a trace-linear function of A, A^{-1}
// and (pi/2 I + tau A)^{-1}; the constants were fitted by least squares.
inline constexpr double kApproxC0 = 0.1873;
inline constexpr double kApproxC1 = -0.01;

// Scalar kernel of the surrogate: rho_approx = Tr[B B^T h(A)].
double approx_mode_gain(double lambda, double tau);
double performance_approx(const SystemMatrix& m, const NoiseModel& noise, double tau);

}  // namespace delaynet
