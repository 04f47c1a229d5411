#include "delaynet/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "delaynet/errors.hpp"

namespace delaynet {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Tr[P A_e R A_f] for edge indicators A_e, A_f.
double edge_pair_trace(const Matrix& p, const Matrix& r, const Edge& e, const Edge& f) {
  const std::size_t a = e.i, b = e.j, c = f.i, d = f.j;
  return p(d, a) * r(b, c) + p(c, a) * r(b, d) + p(d, b) * r(a, c) + p(c, b) * r(a, d);
}

struct Evaluation {
  double value = 0.0;
  std::vector<double> grad;
  Matrix hess;

  explicit Evaluation(std::size_t m, bool with_hessian) : grad(m, 0.0), hess(with_hessian ? m : 0, with_hessian ? m : 0) {}

  void accumulate(const Evaluation& other, double scale) {
    value += scale * other.value;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += scale * other.grad[k];
    if (hess.rows() > 0 && other.hess.rows() > 0)
      for (std::size_t k = 0; k < hess.rows() * hess.cols(); ++k) hess.data()[k] += scale * other.hess.data()[k];
  }
};

// Everything the objective and barrier need at one weight vector.
struct SpectralPieces {
  Matrix system;
  EigenDecomposition eigen;
  Matrix x1;  // (-A)^{-1}
  Matrix x2;  // (pi/2 I + tau A)^{-1}
  Matrix s1;  // (-A - eps I)^{-1}
  Matrix s2;  // (pi/(2 tau) I + A)^{-1}, empty when tau == 0
  double margin_upper = 0.0;
  double margin_lower = 0.0;
};

class ProblemModel {
 public:
  explicit ProblemModel(const OptimizationProblem& prob)
      : prob_(prob), n_(prob.base.node_count()), m_(prob.base.edge_count()), edges_(prob.base.edges().begin(), prob.base.edges().end()) {
    if (!(prob.budget > 0.0) || !std::isfinite(prob.budget)) throw InputError("budget must be positive and finite");
    if (!(prob.epsilon > 0.0)) throw InputError("epsilon must be positive");
    if (!(prob.tau >= 0.0) || !std::isfinite(prob.tau)) throw InputError("tau must be finite and nonnegative");
    if (prob.kind == ProblemKind::Optimal) {
      if (prob.noise.kind != NoiseKind::ModelingError)
        throw InputError("traffic optimization is defined for modeling-error noise");
      if (prob.noise.sigma.size() != n_) throw InputError("sigma length does not match the network size");
      weighting_ = Matrix(n_, n_);
      for (std::size_t i = 0; i < n_; ++i) weighting_(i, i) = prob.noise.sigma[i] * prob.noise.sigma[i];
    }
  }

  std::size_t nodes() const { return n_; }
  std::size_t edges() const { return m_; }
  const OptimizationProblem& problem() const { return prob_; }

  Matrix system_at(std::span<const double> w) const {
    Matrix a(n_, n_);
    const double beta = prob_.base.beta();
    for (std::size_t k = 0; k < m_; ++k) {
      a(edges_[k].i, edges_[k].j) += beta * w[k];
      a(edges_[k].j, edges_[k].i) += beta * w[k];
    }
    for (std::size_t i = 0; i < n_; ++i) a(i, i) = -prob_.base.delta()[i];
    return a;
  }

  // nullopt unless strictly inside the spectral box.
  std::optional<SpectralPieces> pieces(std::span<const double> w) const {
    SpectralPieces p;
    p.system = system_at(w);
    p.eigen = eigendecompose(p.system);
    const double eps = prob_.epsilon;
    const double tau = prob_.tau;
    p.margin_upper = -eps - p.eigen.values.back();
    p.margin_lower = tau > 0.0 ? p.eigen.values.front() + delay_bound(tau) : std::numeric_limits<double>::infinity();
    if (!(p.margin_upper > 0.0) || !(p.margin_lower > 0.0)) return std::nullopt;
    p.x1 = matrix_function(p.eigen, [](double l) { return -1.0 / l; });
    p.x2 = matrix_function(p.eigen, [tau](double l) { return 1.0 / (kHalfPi + tau * l); });
    p.s1 = matrix_function(p.eigen, [eps](double l) { return 1.0 / (-l - eps); });
    if (tau > 0.0) {
      const double bound = delay_bound(tau);
      p.s2 = matrix_function(p.eigen, [bound](double l) { return 1.0 / (bound + l); });
    }
    return p;
  }

  // 1/2 Tr[C X1] + 2tau/pi Tr[C X2] - 1/2 c1 tau^2 Tr[C A] + c0/4 tau Tr[C].
  Evaluation approx_term(const SpectralPieces& p, const Matrix& c, bool with_hessian) const {
    const double tau = prob_.tau;
    const double beta = prob_.base.beta();
    Evaluation ev(m_, with_hessian);
    ev.value = 0.5 * trace_product(c, p.x1) + (2.0 * tau / std::numbers::pi) * trace_product(c, p.x2) -
               0.5 * kApproxC1 * tau * tau * trace_product(c, p.system) + 0.25 * kApproxC0 * tau * trace(c);
    const Matrix p1 = multiply(p.x1, multiply(c, p.x1));
    Matrix p2;
    if (tau > 0.0) p2 = multiply(p.x2, multiply(c, p.x2));
    const double k2 = 4.0 * tau * tau * beta / std::numbers::pi;
    for (std::size_t e = 0; e < m_; ++e) {
      const std::size_t a = edges_[e].i, b = edges_[e].j;
      double g = beta * p1(a, b) - kApproxC1 * tau * tau * beta * c(a, b);
      if (tau > 0.0) g -= k2 * p2(a, b);
      ev.grad[e] = g;
    }
    if (with_hessian) {
      const double h1 = beta * beta;
      const double h2 = 4.0 * tau * tau * tau * beta * beta / std::numbers::pi;
      for (std::size_t e = 0; e < m_; ++e)
        for (std::size_t f = e; f < m_; ++f) {
          double h = h1 * edge_pair_trace(p1, p.x1, edges_[e], edges_[f]);
          if (tau > 0.0) h += h2 * edge_pair_trace(p2, p.x2, edges_[e], edges_[f]);
          ev.hess(e, f) = h;
          ev.hess(f, e) = h;
        }
    }
    return ev;
  }

  Evaluation optimal_objective(const SpectralPieces& p, bool with_hessian) const {
    return approx_term(p, weighting_, with_hessian);
  }

  // n * approx centrality of every node, each with derivatives.
  std::vector<Evaluation> node_terms(const SpectralPieces& p, bool with_hessian) const {
    std::vector<Evaluation> out;
    out.reserve(n_);
    Matrix unit(n_, n_);
    for (std::size_t i = 0; i < n_; ++i) {
      unit(i, i) = static_cast<double>(n_);
      out.push_back(approx_term(p, unit, with_hessian));
      unit(i, i) = 0.0;
    }
    return out;
  }

  // Smoothed max: T log sum exp(v_i / T).
  static Evaluation soft_max(const std::vector<Evaluation>& terms, double temperature, bool with_hessian) {
    const std::size_t m = terms.front().grad.size();
    double vmax = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) vmax = std::max(vmax, t.value);
    std::vector<double> prob(terms.size());
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      prob[i] = std::exp((terms[i].value - vmax) / temperature);
      total += prob[i];
    }
    for (double& q : prob) q /= total;
    Evaluation ev(m, with_hessian);
    ev.value = vmax + temperature * std::log(total);
    std::vector<double> mean(m, 0.0);
    for (std::size_t i = 0; i < terms.size(); ++i)
      for (std::size_t k = 0; k < m; ++k) mean[k] += prob[i] * terms[i].grad[k];
    ev.grad = mean;
    if (with_hessian) {
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (prob[i] < 1e-300) continue;
        for (std::size_t e = 0; e < m; ++e)
          for (std::size_t f = 0; f < m; ++f)
            ev.hess(e, f) += prob[i] * (terms[i].hess(e, f) + terms[i].grad[e] * terms[i].grad[f] / temperature);
      }
      for (std::size_t e = 0; e < m; ++e)
        for (std::size_t f = 0; f < m; ++f) ev.hess(e, f) -= mean[e] * mean[f] / temperature;
    }
    return ev;
  }

  // Objective actually minimized (robust uses the smoothed max).
  Evaluation smooth_value(const SpectralPieces& p, double temperature, bool with_hessian) const {
    if (prob_.kind == ProblemKind::Optimal) return optimal_objective(p, with_hessian);
    return soft_max(node_terms(p, with_hessian), temperature, with_hessian);
  }

  // -log det(-A - eps I) - log det(pi/(2tau) I + A).
  Evaluation box_barrier(const SpectralPieces& p, bool with_hessian) const {
    const double beta = prob_.base.beta();
    Evaluation ev(m_, with_hessian);
    for (double l : p.eigen.values) {
      ev.value -= std::log(-l - prob_.epsilon);
      if (prob_.tau > 0.0) ev.value -= std::log(delay_bound(prob_.tau) + l);
    }
    const bool delayed = prob_.tau > 0.0;
    for (std::size_t e = 0; e < m_; ++e) {
      const std::size_t a = edges_[e].i, b = edges_[e].j;
      ev.grad[e] = 2.0 * beta * p.s1(a, b) - (delayed ? 2.0 * beta * p.s2(a, b) : 0.0);
    }
    if (with_hessian) {
      for (std::size_t e = 0; e < m_; ++e)
        for (std::size_t f = e; f < m_; ++f) {
          double h = beta * beta * edge_pair_trace(p.s1, p.s1, edges_[e], edges_[f]);
          if (delayed) h += beta * beta * edge_pair_trace(p.s2, p.s2, edges_[e], edges_[f]);
          ev.hess(e, f) = h;
          ev.hess(f, e) = h;
        }
    }
    return ev;
  }

 private:
  const OptimizationProblem& prob_;
  std::size_t n_;
  std::size_t m_;
  std::vector<Edge> edges_;
  Matrix weighting_;
};

// Newton's method with the budget equality eliminated by solving the KKT
// system of each step; `fixed` edges stay at their current value and drop out
// of the nonnegativity barrier.
class BarrierNewton {
 public:
  BarrierNewton(const ProblemModel& model, const BarrierOptions& options) : model_(model), opt_(options) {}

  struct StageResult {
    bool ok = true;
    std::size_t iterations = 0;
    // Without the bound barrier: the free edge whose weight reached zero.
    std::optional<std::size_t> blocked;
  };

  double penalized_value(std::span<const double> w, const SpectralPieces& p, double mu, double temperature,
                         const std::vector<bool>& fixed) const {
    double v = model_.smooth_value(p, temperature, false).value + mu * model_.box_barrier(p, false).value;
    for (std::size_t e = 0; e < w.size(); ++e)
      if (!fixed[e]) v -= mu * std::log(w[e]);
    return v;
  }

  // `bound_barrier` false: free weights carry no log barrier (used while
  // polishing). A step that would drive a free weight negative is cut at
  // zero and the stage returns with that edge reported as blocked.
  StageResult minimize(std::vector<double>& w, double mu, double temperature, const std::vector<bool>& fixed,
                       bool bound_barrier, double tolerance) const {
    StageResult res;
    const std::size_t m = w.size();
    std::vector<std::size_t> free;
    for (std::size_t e = 0; e < m; ++e)
      if (!fixed[e]) free.push_back(e);
    if (free.size() <= 1) return res;
    const std::vector<bool> no_bound_barrier(m, true);
    const std::vector<bool>& barrier_fixed = bound_barrier ? fixed : no_bound_barrier;

    for (int it = 0; it < opt_.max_newton_per_stage; ++it) {
      auto p = model_.pieces(w);
      if (!p) {
        res.ok = false;
        return res;
      }
      Evaluation ev = model_.smooth_value(*p, temperature, true);
      ev.accumulate(model_.box_barrier(*p, true), mu);
      for (std::size_t e : free) {
        if (!bound_barrier) break;
        ev.value -= mu * std::log(w[e]);
        ev.grad[e] -= mu / w[e];
        ev.hess(e, e) += mu / (w[e] * w[e]);
      }

      const std::size_t k = free.size();
      Matrix kkt(k + 1, k + 1);
      std::vector<double> rhs(k + 1, 0.0);
      double hscale = 0.0;
      for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < k; ++c) kkt(r, c) = ev.hess(free[r], free[c]);
        hscale = std::max(hscale, std::abs(kkt(r, r)));
        kkt(r, k) = 1.0;
        kkt(k, r) = 1.0;
        rhs[r] = -ev.grad[free[r]];
      }
      std::vector<double> sol;
      try {
        sol = solve(kkt, rhs);
      } catch (const SingularityError&) {
        for (std::size_t r = 0; r < k; ++r) kkt(r, r) += 1e-12 * (1.0 + hscale);
        sol = solve(kkt, rhs);
      }
      std::vector<double> dir(m, 0.0);
      double slope = 0.0;
      for (std::size_t r = 0; r < k; ++r) {
        dir[free[r]] = sol[r];
        slope += ev.grad[free[r]] * sol[r];
      }
      ++res.iterations;
      if (-slope * 0.5 <= tolerance * std::max(1.0, std::abs(ev.value))) return res;
      if (slope >= 0.0) return res;  // numerically flat

      const double current = penalized_value(w, *p, mu, temperature, barrier_fixed);
      std::vector<double> trial(m);
      double t_block = std::numeric_limits<double>::infinity();
      std::size_t block_edge = 0;
      if (!bound_barrier)
        for (std::size_t e : free)
          if (dir[e] < 0.0 && -w[e] / dir[e] < t_block) t_block = -w[e] / dir[e], block_edge = e;
      const auto take = [&](double t) {
        for (std::size_t e = 0; e < m; ++e) trial[e] = w[e] + t * dir[e];
      };
      if (t_block < 1.0) {
        take(t_block);
        trial[block_edge] = 0.0;
        auto tp = model_.pieces(trial);
        if (tp && penalized_value(trial, *tp, mu, temperature, barrier_fixed) <= current) {
          rebalance(trial, fixed, block_edge);
          w = trial;
          res.blocked = block_edge;
          return res;
        }
      }
      double t = std::min(1.0, t_block < 1.0 ? opt_.backtrack * t_block : 1.0);
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls, t *= opt_.backtrack) {
        take(t);
        bool positive = true;
        for (std::size_t e : free)
          if (!(trial[e] > 0.0)) positive = false;
        if (!positive) continue;
        auto tp = model_.pieces(trial);
        if (!tp) continue;
        const double value = penalized_value(trial, *tp, mu, temperature, barrier_fixed);
        if (value <= current + opt_.armijo_slope * t * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) return res;
      rebalance(trial, fixed, m);
      w = trial;
    }
    return res;
  }

 private:
  // Spreads rounding drift in the budget over the free edges (except `skip`).
  void rebalance(std::vector<double>& w, const std::vector<bool>& fixed, std::size_t skip) const {
    std::size_t count = 0;
    for (std::size_t e = 0; e < w.size(); ++e)
      if (!fixed[e] && e != skip) ++count;
    if (count == 0) return;
    const double drift = (model_.problem().budget - std::accumulate(w.begin(), w.end(), 0.0)) / static_cast<double>(count);
    for (std::size_t e = 0; e < w.size(); ++e)
      if (!fixed[e] && e != skip) w[e] += drift;
  }

  const ProblemModel& model_;
  const BarrierOptions& opt_;
};

// Smallest natural residual max_e |min(w_e, g_e - nu)| over the budget
// multiplier nu; zero exactly at a KKT point of min f s.t. w >= 0, sum w = c.
double natural_residual(std::span<const double> w, std::span<const double> g) {
  if (w.empty()) return 0.0;
  const auto feasible = [&](double r) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < w.size(); ++e) {
      hi = std::min(hi, g[e] + r);
      if (w[e] > r) lo = std::max(lo, g[e] - r);
    }
    return lo <= hi;
  };
  const auto [gmin, gmax] = std::minmax_element(g.begin(), g.end());
  double hi = *std::max_element(w.begin(), w.end()) + (*gmax - *gmin) + 1.0;
  double lo = 0.0;
  if (feasible(0.0)) return 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-17 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::vector<double> scaled_baseline(const EpidemicNetwork& net, double budget) {
  std::vector<double> w = net.weights();
  const double total = net.total_weight();
  if (w.empty()) return w;
  if (total > 0.0) {
    for (double& x : w) x *= budget / total;
  } else {
    std::fill(w.begin(), w.end(), budget / static_cast<double>(w.size()));
  }
  return w;
}

std::vector<double> initial_point(const ProblemModel& model) {
  const auto& prob = model.problem();
  const std::size_t m = model.edges();
  std::vector<double> uniform(m, prob.budget / static_cast<double>(m));
  if (model.pieces(uniform)) return uniform;
  std::vector<double> baseline = scaled_baseline(prob.base, prob.budget);
  const bool positive = std::all_of(baseline.begin(), baseline.end(), [](double x) { return x > 0.0; });
  if (positive && model.pieces(baseline)) return baseline;

  const auto eig = eigendecompose(model.system_at(uniform));
  const auto report = check_stability(eig.values, prob.tau, prob.epsilon);
  std::string which;
  if (!(report.margin_upper > 0.0))
    which += fmt::format("lambda_max = {} > -epsilon = {}", report.lambda_max, -prob.epsilon);
  if (!(report.margin_lower > 0.0)) {
    if (!which.empty()) which += "; ";
    which += fmt::format("lambda_min = {} < -pi/(2 tau) = {}", report.lambda_min, -report.delay_bound);
  }
  throw InfeasibleError(fmt::format("budget {} is infeasible: uniform weights violate the spectral box ({})",
                                    prob.budget, which));
}

double exact_value(const OptimizationProblem& prob, std::span<const double> w) {
  const SystemMatrix sys = assemble_system_matrix(prob.base.with_weights(w));
  if (prob.kind == ProblemKind::Optimal) return performance_closed_form(sys, prob.noise, prob.tau).rho_ss;
  return exact_worst_case_rho(sys, prob.tau);
}

double exact_value_or_nan(const OptimizationProblem& prob, std::span<const double> w) {
  try {
    return exact_value(prob, w);
  } catch (const StabilityError&) {
    return kNaN;
  } catch (const SingularityError&) {
    return kNaN;
  }
}

void finalize(const OptimizationProblem& prob, OptimizationResult& r) {
  r.kind = prob.kind;
  r.budget = prob.budget;
  r.objective = smooth_objective(r.weights, prob);
  r.feasibility = check_feasibility(prob, r.weights);
  r.exact_rho = exact_value(prob, r.weights);
  r.baseline_weights = scaled_baseline(prob.base, prob.budget);
  r.baseline_rho = r.baseline_weights.empty() ? r.exact_rho : exact_value_or_nan(prob, r.baseline_weights);
  if (std::isfinite(r.baseline_rho) && r.baseline_rho > 0.0)
    r.improvement_pct = static_cast<int>(std::lround((r.baseline_rho - r.exact_rho) / r.baseline_rho * 100.0));
  if (prob.kind == ProblemKind::Robust) {
    const SystemMatrix sys = assemble_system_matrix(prob.base.with_weights(r.weights));
    r.worst_node = inner_worst_case(approx_centrality(sys, prob.tau)).index;
  }
}

OptimizationResult solve_impl(const OptimizationProblem& prob) {
  const ProblemModel model(prob);
  const std::size_t m = model.edges();
  OptimizationResult r;

  if (m <= 1) {
    // Nothing to reallocate: no edges, or one edge that must carry the budget.
    r.weights = m == 0 ? std::vector<double>{} : std::vector<double>{prob.budget};
    const auto eig = eigendecompose(model.system_at(r.weights));
    if (!check_stability(eig.values, prob.tau, prob.epsilon).stable)
      throw InfeasibleError("the only admissible weights violate the spectral box");
    finalize(prob, r);
    return r;
  }

  const BarrierOptions& opt = prob.options;
  std::vector<double> w = initial_point(model);
  const BarrierNewton newton(model, opt);
  const std::vector<bool> none_fixed(m, false);

  double temperature = 1.0;
  double temperature_floor = 1.0;
  if (prob.kind == ProblemKind::Robust) {
    const auto p = model.pieces(w);
    double scale = 0.0;
    for (const auto& t : model.node_terms(*p, false)) scale = std::max(scale, std::abs(t.value));
    scale = std::max(scale, 1e-12);
    temperature = opt.temperature_start * scale;
    temperature_floor = opt.temperature_end * scale;
  }

  double mu = opt.mu_start;
  constexpr double kStageTolerance = 1e-12;
  while (true) {
    const auto stage = newton.minimize(w, mu, temperature, none_fixed, true, kStageTolerance);
    r.iterations += stage.iterations;
    if (!stage.ok) throw ConvergenceError("barrier iterate left the spectral box");
    if (mu <= opt.mu_end * (1.0 + 1e-12)) break;
    mu = std::max(opt.mu_end, mu / opt.mu_factor);
    temperature = std::max(temperature_floor, temperature / opt.mu_factor);
  }

  // Gradient of the minimized objective plus the box-barrier term, i.e. the
  // Lagrangian gradient with barrier estimates of the box multipliers.
  const auto stationarity_gradient = [&](std::span<const double> x) {
    const auto p = model.pieces(x);
    Evaluation ev = model.smooth_value(*p, temperature, false);
    ev.accumulate(model.box_barrier(*p, false), mu);
    return ev.grad;
  };

  r.weights = w;
  r.kkt_residual = natural_residual(w, stationarity_gradient(w));

  if (opt.polish) {
    // Primal active-set refinement without the bound barrier. Edges whose
    // barrier multiplier mu / w_e exceeds the weight start out switched off;
    // edges are switched off when a step reaches zero and switched back on
    // when their multiplier turns negative.
    std::vector<bool> fixed(m, false);
    std::vector<double> candidate = w;
    for (std::size_t e = 0; e < m; ++e) fixed[e] = w[e] * w[e] < mu;
    double released = 0.0;
    std::size_t n_free = 0;
    for (std::size_t e = 0; e < m; ++e) {
      if (fixed[e]) released += candidate[e], candidate[e] = 0.0;
      else ++n_free;
    }
    bool ok = n_free >= 2;
    if (ok) {
      for (std::size_t e = 0; e < m; ++e)
        if (!fixed[e]) candidate[e] += released / static_cast<double>(n_free);
      ok = model.pieces(candidate).has_value();
    }
    std::size_t polish_iterations = 0;
    for (std::size_t round = 0; ok && round < 4 * m; ++round) {
      const auto stage = newton.minimize(candidate, mu, temperature, fixed, false, 1e-15);
      polish_iterations += stage.iterations;
      if (!stage.ok) {
        ok = false;
        break;
      }
      if (stage.blocked) {
        fixed[*stage.blocked] = true;
        continue;
      }
      const auto g = stationarity_gradient(candidate);
      double nu = 0.0;
      std::size_t count = 0;
      for (std::size_t e = 0; e < m; ++e)
        if (!fixed[e]) nu += g[e], ++count;
      nu /= static_cast<double>(count);
      std::size_t worst = m;
      double most_negative = -1e-12 * std::max(1.0, std::abs(nu));
      for (std::size_t e = 0; e < m; ++e)
        if (fixed[e] && g[e] - nu < most_negative) most_negative = g[e] - nu, worst = e;
      if (worst == m) break;
      fixed[worst] = false;
    }
    if (ok && std::all_of(candidate.begin(), candidate.end(), [](double x) { return x >= 0.0; }) &&
        model.pieces(candidate)) {
      const double polished = natural_residual(candidate, stationarity_gradient(candidate));
      if (polished <= r.kkt_residual) {
        r.iterations += polish_iterations;
        r.weights = candidate;
        r.kkt_residual = polished;
        r.polished = true;
      }
    }
  }

  finalize(prob, r);
  return r;
}

}  // namespace

OptimizationProblem make_problem(const EpidemicNetwork& net, ProblemKind kind, std::optional<double> budget,
                                 double epsilon, std::optional<double> tau) {
  return OptimizationProblem{
      net,
      budget.value_or(net.total_weight()),
      epsilon,
      tau.value_or(net.tau()),
      kind,
      NoiseModel{NoiseKind::ModelingError, std::vector<double>(net.sigma().begin(), net.sigma().end())},
      BarrierOptions{}};
}

OptimizationResult solve(const OptimizationProblem& prob) { return solve_impl(prob); }

OptimizationResult solve_optimal(const OptimizationProblem& prob) {
  OptimizationProblem p = prob;
  p.kind = ProblemKind::Optimal;
  return solve_impl(p);
}

OptimizationResult solve_robust(const OptimizationProblem& prob) {
  OptimizationProblem p = prob;
  p.kind = ProblemKind::Robust;
  return solve_impl(p);
}

std::vector<double> approx_centrality(const SystemMatrix& m, double tau) {
  require_performance_defined(m.eigenvalues(), tau);
  for (double l : m.eigenvalues()) require_clear_of_singularity(kHalfPi + tau * l, "pi/2 + tau lambda");
  return matrix_function_diagonal(m.eigen(), [tau](double l) { return approx_mode_gain(l, tau); });
}

double smooth_objective(std::span<const double> weights, const OptimizationProblem& prob) {
  const SystemMatrix sys = assemble_system_matrix(prob.base.with_weights(weights));
  if (prob.kind == ProblemKind::Optimal) return performance_approx(sys, prob.noise, prob.tau);
  return inner_worst_case(approx_centrality(sys, prob.tau)).value;
}

std::vector<double> gradient_objective(std::span<const double> weights, const OptimizationProblem& prob) {
  const ProblemModel model(prob);
  const auto p = model.pieces(weights);
  if (!p) throw StabilityError("gradient requested outside the open spectral box");
  if (prob.kind == ProblemKind::Optimal) return model.optimal_objective(*p, false).grad;
  const auto terms = model.node_terms(*p, false);
  std::size_t best = 0;
  for (std::size_t i = 1; i < terms.size(); ++i)
    if (terms[i].value > terms[best].value) best = i;
  return terms[best].grad;
}

WorstCaseNoise inner_worst_case(std::span<const double> eta) {
  if (eta.empty()) throw InputError("empty centrality vector");
  for (double v : eta)
    if (!std::isfinite(v)) throw InputError("centrality must be finite");
  WorstCaseNoise out;
  const std::size_t n = eta.size();
  out.index = static_cast<std::size_t>(std::max_element(eta.begin(), eta.end()) - eta.begin());
  out.sigma_squared.assign(n, 0.0);
  out.sigma_squared[out.index] = static_cast<double>(n);
  out.value = static_cast<double>(n) * eta[out.index];
  return out;
}

WorstCaseNoise inner_worst_case(const CentralityVector& eta) { return inner_worst_case(eta.eta); }

double exact_worst_case_rho(const SystemMatrix& m, double tau) {
  return inner_worst_case(centrality(m, NoiseKind::ModelingError, tau)).value;
}

FeasibilityReport check_feasibility(const OptimizationProblem& prob, std::span<const double> weights) {
  FeasibilityReport f;
  f.min_weight = weights.empty() ? 0.0 : *std::min_element(weights.begin(), weights.end());
  f.budget_residual = weights.empty() ? 0.0 : std::accumulate(weights.begin(), weights.end(), 0.0) - prob.budget;
  const auto eig = eigendecompose(system_matrix_entries(prob.base.with_weights(weights)));
  const auto report = check_stability(eig.values, prob.tau, prob.epsilon);
  f.margin_upper = report.margin_upper;
  f.margin_lower = report.margin_lower;
  f.feasible = f.min_weight >= -1e-10 && (weights.empty() || std::abs(f.budget_residual) <= 1e-8 * prob.budget) &&
               f.margin_upper >= -1e-8 && f.margin_lower >= -1e-8;
  return f;
}

double uniform_budget_ceiling(const EpidemicNetwork& net, double epsilon) {
  if (net.edge_count() == 0) return 0.0;
  std::vector<double> ones(net.edge_count(), 1.0);
  const EpidemicNetwork unit = net.with_weights(ones);
  // lambda_max(beta s A_1 - Delta) is increasing in s; bisect on s.
  const auto upper_ok = [&](double s) {
    std::vector<double> w(net.edge_count(), s);
    return eigendecompose(system_matrix_entries(unit.with_weights(w))).values.back() <= -epsilon;
  };
  if (!upper_ok(0.0)) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (upper_ok(hi)) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (upper_ok(mid) ? lo : hi) = mid;
  }
  return lo * static_cast<double>(net.edge_count());
}

std::vector<SweepRow> sweep_budget(const EpidemicNetwork& net, std::span<const double> budgets, double epsilon,
                                   std::optional<double> tau, const BarrierOptions& options) {
  const EpidemicNetwork uniform_net = net.with_sigma(std::vector<double>(net.node_count(), 1.0));
  const auto run_one = [&](double c) {
    SweepRow row;
    row.budget = c;
    auto opt = make_problem(uniform_net, ProblemKind::Optimal, c, epsilon, tau);
    opt.options = options;
    auto rob = opt;
    rob.kind = ProblemKind::Robust;

    const auto uniform_rho = [&](std::span<const double> w) {
      auto p = opt;
      return exact_value_or_nan(p, w);
    };
    const auto worst_rho = [&](std::span<const double> w) { return exact_value_or_nan(rob, w); };
    const std::vector<double> base = scaled_baseline(net, c);
    row.rho_orig_uniform = uniform_rho(base);
    row.rho_orig_worst = worst_rho(base);
    row.rho_opt_uniform = row.rho_rob_uniform = row.rho_opt_worst = row.rho_rob_worst = kNaN;
    try {
      row.optimal = solve_impl(opt);
      row.robust = solve_impl(rob);
      row.rho_opt_uniform = uniform_rho(row.optimal->weights);
      row.rho_opt_worst = worst_rho(row.optimal->weights);
      row.rho_rob_uniform = uniform_rho(row.robust->weights);
      row.rho_rob_worst = worst_rho(row.robust->weights);
      row.feasible = true;
    } catch (const InfeasibleError&) {
      row.feasible = false;
    } catch (const ConvergenceError&) {
      row.feasible = false;
    } catch (const StabilityError&) {
      row.feasible = false;
    }
    return row;
  };

  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<SweepRow> rows(budgets.size());
  for (std::size_t start = 0; start < budgets.size(); start += workers) {
    std::vector<std::future<SweepRow>> batch;
    const std::size_t end = std::min(budgets.size(), start + workers);
    for (std::size_t k = start; k < end; ++k) batch.push_back(std::async(std::launch::async, run_one, budgets[k]));
    for (std::size_t k = start; k < end; ++k) rows[k] = batch[k - start].get();
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "c,rho_orig_uniform,rho_opt_uniform,rho_rob_uniform,rho_orig_worst,rho_opt_worst,rho_rob_worst,feasible\n";
  for (const auto& r : rows)
    out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.budget, r.rho_orig_uniform,
                       r.rho_opt_uniform, r.rho_rob_uniform, r.rho_orig_worst, r.rho_opt_worst, r.rho_rob_worst,
                       r.feasible ? 1 : 0);
  return out;
}

std::string result_to_json(const OptimizationResult& r) {
  using nlohmann::json;
  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json doc;
  doc["kind"] = r.kind == ProblemKind::Optimal ? "optimal" : "robust";
  doc["budget"] = r.budget;
  doc["weights"] = r.weights;
  doc["objective"] = num(r.objective);
  doc["exact_rho"] = num(r.exact_rho);
  doc["baseline_rho"] = num(r.baseline_rho);
  doc["improvement_pct"] = r.improvement_pct ? json(*r.improvement_pct) : json(nullptr);
  doc["iterations"] = r.iterations;
  doc["kkt_residual"] = r.kkt_residual;
  doc["polished"] = r.polished;
  doc["feasibility"] = {{"min_weight", r.feasibility.min_weight},
                        {"budget_residual", r.feasibility.budget_residual},
                        {"margin_upper", r.feasibility.margin_upper},
                        {"margin_lower", num(r.feasibility.margin_lower)},
                        {"feasible", r.feasibility.feasible}};
  if (r.kind == ProblemKind::Robust) doc["worst_node"] = r.worst_node + 1;
  return doc.dump(2) + "\n";
}

}  // namespace delaynet
