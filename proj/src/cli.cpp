#include "delaynet/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "delaynet/errors.hpp"
#include "delaynet/network.hpp"
#include "delaynet/optimizer.hpp"
#include "delaynet/performance.hpp"
#include "delaynet/simulator.hpp"
#include "delaynet/spectral.hpp"

namespace delaynet {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::string input;
  std::string out_dir = ".";
  double epsilon = kDefaultEpsilon;
  std::optional<double> tau;
  std::uint64_t seed = 1;
};

// Records one run: parameters and every file it wrote.
class Manifest {
 public:
  Manifest(std::string command, const GlobalOptions& g) : command_(std::move(command)), out_dir_(g.out_dir) {
    doc_["command"] = command_;
    doc_["input_path"] = g.input;
    doc_["tool_version"] = kToolVersion;
    doc_["parameters"]["epsilon"] = g.epsilon;
    doc_["parameters"]["tau"] = g.tau ? json(*g.tau) : json(nullptr);
    doc_["outputs"] = json::array();
    start_ = std::chrono::steady_clock::now();
  }

  json& parameters() { return doc_["parameters"]; }

  fs::path write(const std::string& name, const std::string& content) {
    fs::create_directories(out_dir_);
    const fs::path path = out_dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
    out << content;
    if (!out) throw InputError(fmt::format("failed while writing '{}'", path.string()));
    doc_["outputs"].push_back(path.string());
    return path;
  }

  fs::path finish() {
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    doc_["wall_time_s"] = elapsed;
    fs::create_directories(out_dir_);
    const fs::path path = out_dir_ / fmt::format("manifest_{}.json", command_);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
    out << doc_.dump(2) << "\n";
    return path;
  }

 private:
  std::string command_;
  fs::path out_dir_;
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

EpidemicNetwork load_input(const GlobalOptions& g) {
  if (g.input.empty()) throw InputError("--input is required");
  EpidemicNetwork net = load_network_file(g.input);
  if (g.tau) net = net.with_tau(*g.tau);
  return net;
}

void print_report(const StabilityReport& r, std::size_t nodes, std::size_t edges) {
  fmt::print("nodes {} edges {}\n", nodes, edges);
  fmt::print("lambda_min {:.10g}\nlambda_max {:.10g}\n", r.lambda_min, r.lambda_max);
  fmt::print("epsilon {:.10g}\ntau {:.10g}\ndelay_bound {:.10g}\n", r.epsilon, r.tau, r.delay_bound);
  fmt::print("margin_upper {:.10g}\nmargin_lower {:.10g}\n", r.margin_upper, r.margin_lower);
  fmt::print("verdict {}\n", r.stable ? "stable" : "unstable");
}

// Analyses that need the spectral box refuse unstable inputs up front.
std::optional<int> reject_if_unstable(const SystemMatrix& sys, double tau, double epsilon) {
  const StabilityReport r = check_stability(sys, tau, epsilon);
  if (r.stable) return std::nullopt;
  fmt::print(stderr, "error: network violates the spectral box (margin_upper {:.6g}, margin_lower {:.6g})\n",
             r.margin_upper, r.margin_lower);
  return kExitRejected;
}

int cmd_validate(const GlobalOptions& g) {
  const EpidemicNetwork net = load_input(g);
  const SystemMatrix sys = assemble_system_matrix(net);
  const StabilityReport r = check_stability(sys, net.tau(), g.epsilon);
  print_report(r, net.node_count(), net.edge_count());
  return r.stable ? kExitOk : kExitRejected;
}

struct SimulateOptions {
  std::vector<double> tau_list;
  double t_end = 20.0;
  std::optional<double> dt;
  std::string mode = "nonlinear";
  double p0_max = 0.05;
  std::optional<double> p0_constant;
};

double default_dt(double tau) {
  if (tau <= 0.0) return 0.01;
  const double m = std::max<double>(kMinStepsPerDelay, std::round(tau / 0.01));
  return tau / m;
}

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& s) {
  const EpidemicNetwork net = load_input(g);
  const DynamicsMode mode = parse_dynamics_mode(s.mode);
  std::vector<double> taus = s.tau_list.empty() ? std::vector<double>{net.tau()} : s.tau_list;
  const std::vector<double> p0 = s.p0_constant ? std::vector<double>(net.node_count(), *s.p0_constant)
                                               : random_initial_state(net.node_count(), s.p0_max, g.seed);

  Manifest manifest("simulate", g);
  auto& params = manifest.parameters();
  params["tau_list"] = taus;
  params["t_end"] = s.t_end;
  params["mode"] = std::string(to_string(mode));
  params["seed"] = g.seed;
  params["p0_max"] = s.p0_max;
  params["p0_constant"] = s.p0_constant ? json(*s.p0_constant) : json(nullptr);
  params["dt"] = json::array();

  fmt::print("{:>10} {:>12} {:>24} {:>12} {:>8}\n", "tau", "dt", "peak_height", "peak_time", "clamps");
  for (double tau : taus) {
    TrajectoryConfig cfg;
    cfg.t_end = s.t_end;
    cfg.dt = s.dt.value_or(default_dt(tau));
    cfg.initial_state = p0;
    cfg.mode = mode;
    const Trajectory traj = simulate(net.with_tau(tau), cfg);
    params["dt"].push_back(cfg.dt);
    manifest.write(fmt::format("trajectory_tau_{}.csv", tau), trajectory_csv(traj));
    fmt::print("{:>10.6g} {:>12.6g} {:>24.17g} {:>12.6g} {:>8}\n", tau, cfg.dt, traj.peak_height, traj.peak_time,
               traj.clamp_events);
  }
  manifest.finish();
  return kExitOk;
}

int cmd_perf(const GlobalOptions& g, const std::string& noise_text, bool oracle) {
  const EpidemicNetwork net = load_input(g);
  const NoiseKind kind = parse_noise_kind(noise_text);
  const SystemMatrix sys = assemble_system_matrix(net);
  if (auto code = reject_if_unstable(sys, net.tau(), g.epsilon)) return *code;
  const NoiseModel noise{kind, std::vector<double>(net.sigma().begin(), net.sigma().end())};
  const PerformanceValue perf = performance_closed_form(sys, noise, net.tau());

  Manifest manifest("perf", g);
  manifest.parameters()["noise"] = std::string(to_string(kind));
  json doc;
  doc["noise"] = std::string(to_string(kind));
  doc["tau"] = net.tau();
  doc["rho_ss"] = perf.rho_ss;
  doc["per_mode"] = perf.per_mode;
  doc["eigenvalues"] = std::vector<double>(sys.eigenvalues().begin(), sys.eigenvalues().end());
  doc["rho_approx"] = performance_approx(sys, noise, net.tau());
  if (oracle) doc["rho_frequency_oracle"] = performance_frequency_oracle(sys, noise, net.tau());
  manifest.write("perf.json", doc.dump(2) + "\n");
  manifest.finish();
  fmt::print("rho_ss {:.17g}\n", perf.rho_ss);
  if (oracle) fmt::print("rho_frequency_oracle {:.17g}\n", doc["rho_frequency_oracle"].get<double>());
  return kExitOk;
}

int cmd_centrality(const GlobalOptions& g, const std::string& noise_text) {
  const EpidemicNetwork net = load_input(g);
  const NoiseKind kind = parse_noise_kind(noise_text);
  const SystemMatrix sys = assemble_system_matrix(net);
  if (auto code = reject_if_unstable(sys, net.tau(), g.epsilon)) return *code;
  const CentralityVector eta = centrality(sys, kind, net.tau());
  const NoiseModel noise{kind, std::vector<double>(net.sigma().begin(), net.sigma().end())};
  const double rho = performance_closed_form(sys, noise, net.tau()).rho_ss;

  std::vector<std::size_t> order(eta.eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eta.eta[a] > eta.eta[b]; });

  std::string csv = "rank,node,eta,sigma,eta_sigma2\n";
  double total = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    const double s = net.sigma()[i];
    const double contribution = eta.eta[i] * s * s;
    total += contribution;
    csv += fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", r + 1, i + 1, eta.eta[i], s, contribution);
  }
  csv += fmt::format("# sum_eta_sigma2={:.17g},rho_ss={:.17g},relative_difference={:.3e}\n", total, rho,
                     rho > 0.0 ? std::abs(total - rho) / rho : std::abs(total - rho));

  Manifest manifest("centrality", g);
  manifest.parameters()["noise"] = std::string(to_string(kind));
  manifest.write(fmt::format("centrality_{}.csv", to_string(kind)), csv);
  manifest.finish();
  fmt::print("{}", csv);
  return kExitOk;
}

int cmd_optimize(const GlobalOptions& g, ProblemKind kind, std::optional<double> budget) {
  const EpidemicNetwork net = load_input(g);
  const OptimizationProblem prob = make_problem(net, kind, budget, g.epsilon);
  const OptimizationResult result = solve(prob);
  const std::string stem = kind == ProblemKind::Optimal ? "optimize" : "robust";

  Manifest manifest(stem, g);
  manifest.parameters()["budget"] = prob.budget;
  manifest.parameters()["noise"] = "model";
  manifest.write(stem + "_result.json", result_to_json(result));
  manifest.write(stem + "_network.json", network_to_json(net.with_weights(result.weights)));
  manifest.finish();

  fmt::print("budget {:.17g}\n", result.budget);
  fmt::print("objective {:.17g}\n", result.objective);
  fmt::print("exact_rho {:.17g}\n", result.exact_rho);
  fmt::print("baseline_rho {:.17g}\n", result.baseline_rho);
  if (result.improvement_pct) fmt::print("improvement_pct {}\n", *result.improvement_pct);
  fmt::print("iterations {}\nkkt_residual {:.3e}\n", result.iterations, result.kkt_residual);
  return kExitOk;
}

struct SweepOptions {
  std::vector<double> budgets;
  int points = 16;
};

int cmd_sweep(const GlobalOptions& g, const SweepOptions& s) {
  const EpidemicNetwork net = load_input(g);
  std::vector<double> budgets = s.budgets;
  const double ceiling = uniform_budget_ceiling(net, g.epsilon);
  if (budgets.empty()) {
    if (s.points < 2) throw InputError("--points must be at least 2");
    // The range 0.1 .. 63 mapped onto the budgets that uniform weights can carry.
    const double scale = 0.98 * ceiling / 63.0;
    for (int k = 0; k < s.points; ++k) budgets.push_back(scale * (0.1 + (63.0 - 0.1) * k / (s.points - 1)));
  }
  for (double c : budgets)
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("budgets must be positive");

  const auto rows = sweep_budget(net, budgets, g.epsilon);

  // Per-edge comparison at the baseline budget.
  const auto base_row = sweep_budget(net, std::vector<double>{net.total_weight()}, g.epsilon);
  std::string weights = "edge,i,j,original,optimal,robust\n";
  const auto& edges = net.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& r = base_row.front();
    weights += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g}\n", e + 1, edges[e].i + 1, edges[e].j + 1,
                           edges[e].weight, r.optimal ? r.optimal->weights[e] : std::nan(""),
                           r.robust ? r.robust->weights[e] : std::nan(""));
  }

  Manifest manifest("sweep", g);
  manifest.parameters()["budgets"] = budgets;
  manifest.parameters()["uniform_ceiling"] = ceiling;
  manifest.parameters()["noise"] = "uniform sigma = 1 and worst case";
  manifest.write("sweep.csv", sweep_csv(rows));
  manifest.write("weights.csv", weights);
  manifest.finish();

  fmt::print("{}", sweep_csv(rows));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Delayed SIS meta-population network toolkit", "delaynet"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--input,-i", g.input, "Network JSON file")->check(CLI::ExistingFile);
  app.add_option("--out-dir,-o", g.out_dir, "Directory for output files");
  app.add_option("--epsilon", g.epsilon, "Decay-rate threshold")->check(CLI::PositiveNumber);
  app.add_option("--tau", g.tau, "Override the delay from the file")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Seed for random initial states");

  auto* validate = app.add_subcommand("validate", "Check the spectral stability box");

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Integrate the delayed dynamics");
  simulate_cmd->add_option("--tau-list", sim.tau_list, "Delays to simulate")->delimiter(',');
  simulate_cmd->add_option("--t-end", sim.t_end, "Horizon")->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--dt", sim.dt, "Step size (default: tau split into >= 20 steps)");
  simulate_cmd->add_option("--mode", sim.mode, "nonlinear or linearized");
  simulate_cmd->add_option("--p0-max", sim.p0_max, "Random initial infection upper level");
  simulate_cmd->add_option("--p0", sim.p0_constant, "Constant initial infection instead of random");

  std::string perf_noise = "model";
  bool perf_oracle = false;
  auto* perf = app.add_subcommand("perf", "Steady-state performance");
  perf->add_option("--noise", perf_noise, "model or test");
  perf->add_flag("--oracle", perf_oracle, "Also integrate the frequency-domain definition");

  std::string cent_noise = "model";
  auto* cent = app.add_subcommand("centrality", "Ranked node centrality");
  cent->add_option("--noise", cent_noise, "model or test");

  std::optional<double> opt_budget;
  auto* optimize = app.add_subcommand("optimize", "Optimal traffic reallocation");
  optimize->add_option("--budget", opt_budget, "Total traffic (default: current total)");
  std::optional<double> rob_budget;
  auto* robust = app.add_subcommand("robust", "Worst-case traffic reallocation");
  robust->add_option("--budget", rob_budget, "Total traffic (default: current total)");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Budget sweep of both problems");
  sweep_cmd->add_option("--budgets", sweep.budgets, "Budgets (default: spread over the feasible range)")
      ->delimiter(',');
  sweep_cmd->add_option("--points", sweep.points, "Number of budgets in the default range");

  for (auto* sub : {validate, simulate_cmd, perf, cent, optimize, robust, sweep_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (validate->parsed()) return cmd_validate(g);
    if (simulate_cmd->parsed()) return cmd_simulate(g, sim);
    if (perf->parsed()) return cmd_perf(g, perf_noise, perf_oracle);
    if (cent->parsed()) return cmd_centrality(g, cent_noise);
    if (optimize->parsed()) return cmd_optimize(g, ProblemKind::Optimal, opt_budget);
    if (robust->parsed()) return cmd_optimize(g, ProblemKind::Robust, rob_budget);
    if (sweep_cmd->parsed()) return cmd_sweep(g, sweep);
  } catch (const InputError& e) {
    fmt::print(stderr, "input error: {}\n", e.what());
    return kExitInput;
  } catch (const StabilityError& e) {
    fmt::print(stderr, "stability error: {}\n", e.what());
    return kExitRejected;
  } catch (const InfeasibleError& e) {
    fmt::print(stderr, "infeasible: {}\n", e.what());
    return kExitRejected;
  } catch (const SingularityError& e) {
    fmt::print(stderr, "singular: {}\n", e.what());
    return kExitRejected;
  } catch (const ConvergenceError& e) {
    fmt::print(stderr, "no convergence: {}\n", e.what());
    return kExitNoConvergence;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "input error: {}\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("delaynet");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace delaynet
