#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delaynet/network.hpp"
#include "delaynet/performance.hpp"
#include "delaynet/spectral.hpp"

namespace delaynet {

enum class ProblemKind { Optimal, Robust };

struct BarrierOptions {
  double mu_start = 1.0;
  double mu_end = 1e-8;
  double mu_factor = 10.0;
  double armijo_slope = 1e-4;
  double backtrack = 0.5;
  int max_newton_per_stage = 200;
  // Log-sum-exp temperature for the robust max, relative to the initial
  // worst-case value; annealed by mu_factor together with mu.
  double temperature_start = 1e-1;
  double temperature_end = 1e-6;
  // Re-solve with zero-weight edges fixed after the barrier path.
  bool polish = true;
};

// Reallocate edge weights (traffic volume) of `base` under a fixed total
// budget while keeping epsilon I <= -A <= pi/(2 tau) I.
struct OptimizationProblem {
  EpidemicNetwork base;
  double budget = 0.0;
  double epsilon = kDefaultEpsilon;
  double tau = 0.0;
  ProblemKind kind = ProblemKind::Optimal;
  NoiseModel noise;  // used by the optimal problem (modeling error only)
  BarrierOptions options;
};

// Defaults: budget = total weight of `net`, tau = net.tau(), noise = modeling
// error with net.sigma().
OptimizationProblem make_problem(const EpidemicNetwork& net, ProblemKind kind,
                                 std::optional<double> budget = std::nullopt, double epsilon = kDefaultEpsilon,
                                 std::optional<double> tau = std::nullopt);

struct FeasibilityReport {
  double min_weight = 0.0;
  double budget_residual = 0.0;  // sum(w) - c
  double margin_upper = 0.0;     // -epsilon - lambda_max
  double margin_lower = 0.0;     // lambda_min + pi/(2 tau)
  bool feasible = false;         // all constraints within tolerance
};

struct OptimizationResult {
  ProblemKind kind = ProblemKind::Optimal;
  std::vector<double> weights;
  std::vector<double> baseline_weights;  // base weights scaled to the budget
  double budget = 0.0;
  // Optimal: approximate rho_ss. Robust: n * max_i of the approximate
  // per-node centrality (exact max, no smoothing).
  double objective = 0.0;
  std::size_t iterations = 0;
  double kkt_residual = 0.0;
  FeasibilityReport feasibility;
  // Exact closed-form performance (robust: worst case over sum sigma^2 = n).
  double exact_rho = 0.0;
  double baseline_rho = 0.0;  // NaN when the scaled baseline is unstable
  std::optional<int> improvement_pct;
  std::size_t worst_node = 0;  // robust: 0-based node attaining the max
  bool polished = false;
};

OptimizationResult solve(const OptimizationProblem& prob);
OptimizationResult solve_optimal(const OptimizationProblem& prob);
OptimizationResult solve_robust(const OptimizationProblem& prob);

// Approximate per-node centrality used by the robust problem:
// 1/2 [ -A^{-1} + 4tau/pi (pi/2 I + tau A)^{-1} - c1 tau^2 A + c0/2 tau I ]_ii.
std::vector<double> approx_centrality(const SystemMatrix& m, double tau);

// Optimal: approximate rho_ss at w. Robust: n * max_i approx_centrality.
double smooth_objective(std::span<const double> weights, const OptimizationProblem& prob);
// Analytic gradient of smooth_objective (robust: gradient of the maximizing
// node's term, a subgradient when the max is not unique).
std::vector<double> gradient_objective(std::span<const double> weights, const OptimizationProblem& prob);

// Worst-case noise for a linear objective sum eta_i sigma_i^2 over
// sum sigma_i^2 = n: all mass on the largest eta (lowest index on ties).
struct WorstCaseNoise {
  std::vector<double> sigma_squared;
  double value = 0.0;
  std::size_t index = 0;
};
WorstCaseNoise inner_worst_case(std::span<const double> eta);
WorstCaseNoise inner_worst_case(const CentralityVector& eta);

// n * max_i eta_i with the exact modeling-error centrality.
double exact_worst_case_rho(const SystemMatrix& m, double tau);

FeasibilityReport check_feasibility(const OptimizationProblem& prob, std::span<const double> weights);

struct SweepRow {
  double budget = 0.0;
  double rho_orig_uniform = 0.0;
  double rho_opt_uniform = 0.0;
  double rho_rob_uniform = 0.0;
  double rho_orig_worst = 0.0;
  double rho_opt_worst = 0.0;
  double rho_rob_worst = 0.0;
  bool feasible = false;
  std::optional<OptimizationResult> optimal;
  std::optional<OptimizationResult> robust;
};

// Solves both problems for every budget with uniform unit noise. Budgets run
// concurrently; rows come back in input order. Infeasible budgets are
// flagged with NaN entries rather than aborting.
std::vector<SweepRow> sweep_budget(const EpidemicNetwork& net, std::span<const double> budgets,
                                   double epsilon = kDefaultEpsilon, std::optional<double> tau = std::nullopt,
                                   const BarrierOptions& options = {});

// Largest budget for which uniform weights still satisfy the upper spectral
// bound (lambda_max <= -epsilon).
double uniform_budget_ceiling(const EpidemicNetwork& net, double epsilon = kDefaultEpsilon);

std::string sweep_csv(std::span<const SweepRow> rows);
std::string result_to_json(const OptimizationResult& result);

}  // namespace delaynet
