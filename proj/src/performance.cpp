#include "delaynet/performance.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <fmt/format.h>

#include "delaynet/errors.hpp"
#include "delaynet/simd/kernels.hpp"

namespace delaynet {

std::string_view to_string(NoiseKind kind) {
  return kind == NoiseKind::ModelingError ? "model" : "test";
}

NoiseKind parse_noise_kind(std::string_view text) {
  if (text == "model" || text == "modeling") return NoiseKind::ModelingError;
  if (text == "test" || text == "testing") return NoiseKind::TestingError;
  throw InputError(fmt::format("unknown noise kind '{}' (expected model or test)", text));
}

Matrix noise_input_matrix(const SystemMatrix& m, const NoiseModel& noise) {
  if (noise.sigma.size() != m.size()) throw InputError("sigma length does not match the network size");
  Matrix b = Matrix::diagonal(noise.sigma);
  if (noise.kind == NoiseKind::TestingError) b = multiply(m.matrix(), b);
  return b;
}

void require_performance_defined(std::span<const double> eigenvalues, double tau) {
  for (double lambda : eigenvalues) {
    if (!(lambda < -kSingularityGuard))
      throw StabilityError(fmt::format("performance undefined: eigenvalue {} is not strictly negative", lambda));
    if (tau > 0.0) {
      if (!(lambda * tau > -std::numbers::pi / 2.0) || !(1.0 + std::sin(lambda * tau) > kSingularityGuard))
        throw StabilityError(
            fmt::format("performance undefined: eigenvalue {} violates the delay bound -pi/(2 tau) = {}", lambda,
                        -delay_bound(tau)));
    }
  }
}

double mode_gain(double lambda, double tau) {
  const double x = lambda * tau;
  return -std::cos(x) / (2.0 * lambda * (1.0 + std::sin(x)));
}

PerformanceValue performance_closed_form(const SystemMatrix& m, const NoiseModel& noise, double tau) {
  require_performance_defined(m.eigenvalues(), tau);
  const Matrix bt = transpose(noise_input_matrix(m, noise));
  const auto& k = simd::kernels();
  const std::size_t n = m.size();
  PerformanceValue out;
  out.per_mode.resize(n);
  std::vector<double> proj(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = m.eigen().vector(i);
    k.gemv(bt.data(), q.data(), proj.data(), n);
    const double phi = k.dot(proj.data(), proj.data(), n);
    out.per_mode[i] = phi * mode_gain(m.eigenvalues()[i], tau);
    out.rho_ss += out.per_mode[i];
  }
  return out;
}

namespace {

using cplx = std::complex<double>;

// ||(jw I - e^{-jw tau} A)^{-1} B||_F^2 by Gaussian elimination with partial
// pivoting on the complex resolvent.
class ResolventIntegrand {
 public:
  ResolventIntegrand(const Matrix& a, const Matrix& b, double tau) : a_(a), b_(b), tau_(tau), n_(a.rows()) {}

  double operator()(double omega) const {
    const std::size_t n = n_;
    std::vector<cplx> lhs(n * n);
    std::vector<cplx> rhs(n * n);
    const cplx shift = std::polar(1.0, -omega * tau_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        lhs[i * n + j] = -shift * a_(i, j);
        rhs[i * n + j] = b_(i, j);
      }
    for (std::size_t i = 0; i < n; ++i) lhs[i * n + i] += cplx(0.0, omega);

    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < n; ++r)
        if (std::abs(lhs[r * n + col]) > std::abs(lhs[piv * n + col])) piv = r;
      if (std::abs(lhs[piv * n + col]) == 0.0) throw SingularityError("resolvent is singular on the imaginary axis");
      if (piv != col)
        for (std::size_t c = 0; c < n; ++c) {
          std::swap(lhs[col * n + c], lhs[piv * n + c]);
          std::swap(rhs[col * n + c], rhs[piv * n + c]);
        }
      const cplx inv = 1.0 / lhs[col * n + col];
      for (std::size_t r = col + 1; r < n; ++r) {
        const cplx f = lhs[r * n + col] * inv;
        if (f == cplx(0.0)) continue;
        for (std::size_t c = col; c < n; ++c) lhs[r * n + c] -= f * lhs[col * n + c];
        for (std::size_t c = 0; c < n; ++c) rhs[r * n + c] -= f * rhs[col * n + c];
      }
    }
    double total = 0.0;
    std::vector<cplx> x(n);
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t i = n; i-- > 0;) {
        cplx s = rhs[i * n + c];
        for (std::size_t l = i + 1; l < n; ++l) s -= lhs[i * n + l] * x[l];
        x[i] = s / lhs[i * n + i];
        total += std::norm(x[i]);
      }
    }
    return total;
  }

 private:
  const Matrix& a_;
  const Matrix& b_;
  double tau_;
  std::size_t n_;
};

struct SimpsonState {
  const ResolventIntegrand& f;
  int max_depth;
  bool converged = true;
};

double simpson_recurse(SimpsonState& st, double a, double b, double fa, double fm, double fb, double whole,
                       double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = st.f(lm);
  const double frm = st.f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  if (depth >= st.max_depth) {
    st.converged = false;
    return left + right + diff / 15.0;
  }
  return simpson_recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

double adaptive_simpson(SimpsonState& st, double a, double b, double tol) {
  const double fa = st.f(a);
  const double fb = st.f(b);
  const double fm = st.f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(st, a, b, fa, fm, fb, whole, tol, 0);
}

}  // namespace

double performance_frequency_oracle(const SystemMatrix& m, const NoiseModel& noise, double tau,
                                    const FrequencyOracleOptions& options) {
  require_performance_defined(m.eigenvalues(), tau);
  const Matrix b = noise_input_matrix(m, noise);
  const double input_energy = norm_frobenius(b) * norm_frobenius(b);
  if (input_energy == 0.0) return 0.0;

  double lam_lo = std::numeric_limits<double>::infinity();
  double lam_hi = 0.0;
  for (double l : m.eigenvalues()) {
    lam_lo = std::min(lam_lo, std::abs(l));
    lam_hi = std::max(lam_hi, std::abs(l));
  }
  const double inv_tau = tau > 0.0 ? 1.0 / tau : 0.0;
  const double omega_max = options.omega_max > 0.0 ? options.omega_max : 1e3 * std::max(lam_hi, inv_tau);

  // Breakpoints: geometric refinement from the slowest mode up to the
  // oscillation scale, uniform panels across the band where the modes and the
  // delay phase interact, then geometric panels out to omega_max.
  const double oscillation = tau > 0.0 ? std::numbers::pi / (4.0 * tau) : lam_hi;
  const double panel_cap = std::max(std::min(oscillation, lam_hi), lam_lo / 4.0);
  const double band_end = std::min(omega_max, 8.0 * std::max(lam_hi, inv_tau > 0.0 ? 2.0 * std::numbers::pi * inv_tau : 0.0));
  std::vector<double> breaks{0.0};
  double x = lam_lo / 16.0;
  while (x < band_end) {
    breaks.push_back(x);
    x += std::min(x, panel_cap);
  }
  x = std::max(band_end, breaks.back());
  while (x < omega_max) {
    if (x > breaks.back()) breaks.push_back(x);
    x *= 2.0;
  }
  breaks.push_back(omega_max);

  const ResolventIntegrand f(m.matrix(), b, tau);
  // Coarse pass fixes the absolute tolerance.
  double coarse = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], c = breaks[k + 1];
    coarse += (c - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + c)) + f(c));
  }
  const double tail = input_energy / omega_max;
  const double abs_tol = options.relative_tolerance * (coarse + tail);

  SimpsonState st{f, options.max_depth};
  double half_line = 0.0;
  const double span = omega_max;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], c = breaks[k + 1];
    half_line += adaptive_simpson(st, a, c, abs_tol * (c - a) / span);
  }
  if (!st.converged) throw ConvergenceError("frequency quadrature did not converge");

  // Beyond omega_max the integrand is input_energy / w^2 up to O(|lambda|^2 / w^4).
  const double tail_error = input_energy * lam_hi * lam_hi / (3.0 * omega_max * omega_max * omega_max);
  const double total = half_line + tail;
  if (tail_error > options.relative_tolerance * total * 10.0)
    throw ConvergenceError("frequency truncation too short for the requested tolerance");
  return total / std::numbers::pi;
}

CentralityVector centrality(const SystemMatrix& m, NoiseKind kind, double tau) {
  require_performance_defined(m.eigenvalues(), tau);
  CentralityVector out;
  out.kind = kind;
  out.tau = tau;
  if (kind == NoiseKind::ModelingError) {
    out.eta = matrix_function_diagonal(m.eigen(), [tau](double l) { return mode_gain(l, tau); });
  } else {
    out.eta = matrix_function_diagonal(m.eigen(), [tau](double l) { return l * l * mode_gain(l, tau); });
  }
  return out;
}

double approx_mode_gain(double lambda, double tau) {
  const double half_pi = std::numbers::pi / 2.0;
  return 0.5 * (-1.0 / lambda + (4.0 * tau / std::numbers::pi) / (half_pi + tau * lambda) -
                kApproxC1 * tau * tau * lambda + 0.5 * kApproxC0 * tau);
}

double performance_approx(const SystemMatrix& m, const NoiseModel& noise, double tau) {
  require_performance_defined(m.eigenvalues(), tau);
  for (double l : m.eigenvalues()) require_clear_of_singularity(std::numbers::pi / 2.0 + tau * l, "pi/2 + tau lambda");
  const Matrix b = noise_input_matrix(m, noise);
  const Matrix ao = multiply(b, transpose(b));
  const Matrix h = matrix_function(m, [tau](double l) { return approx_mode_gain(l, tau); });
  return trace_product(ao, h);
}

}  // namespace delaynet
