#include "delaynet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "delaynet/errors.hpp"
#include "delaynet/simd/kernels.hpp"

namespace delaynet {

std::string_view to_string(DynamicsMode mode) { return mode == DynamicsMode::Nonlinear ? "nonlinear" : "linearized"; }

DynamicsMode parse_dynamics_mode(std::string_view text) {
  if (text == "nonlinear") return DynamicsMode::Nonlinear;
  if (text == "linearized" || text == "linear") return DynamicsMode::Linearized;
  throw InputError(fmt::format("unknown mode '{}' (expected nonlinear or linearized)", text));
}

namespace {

class DelayedSis {
 public:
  DelayedSis(const EpidemicNetwork& net, DynamicsMode mode)
      : adjacency_(net.adjacency()),
        delta_(net.delta().begin(), net.delta().end()),
        beta_(net.beta()),
        saturating_(mode == DynamicsMode::Nonlinear),
        coupled_(net.node_count()),
        kernels_(simd::kernels()) {}

  // out = f(p_delayed); the right-hand side depends only on the delayed state.
  void rhs(std::span<const double> delayed, std::span<double> out) {
    const std::size_t n = delta_.size();
    kernels_.gemv(adjacency_.data(), delayed.data(), coupled_.data(), n);
    kernels_.sis_rhs(coupled_.data(), delayed.data(), delta_.data(), beta_, out.data(), n, saturating_);
  }

 private:
  Matrix adjacency_;
  std::vector<double> delta_;
  double beta_;
  bool saturating_;
  std::vector<double> coupled_;
  const simd::KernelTable& kernels_;
};

}  // namespace

Trajectory simulate(const EpidemicNetwork& net, const TrajectoryConfig& cfg) {
  const std::size_t n = net.node_count();
  const double tau = net.tau();
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw InputError("dt must be positive");
  if (!(cfg.t_end >= 0.0) || !std::isfinite(cfg.t_end)) throw InputError("t_end must be nonnegative");
  if (cfg.initial_state.size() != n) throw InputError("initial state length does not match the network size");
  for (double p : cfg.initial_state)
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("initial state must lie in [0, 1]");

  std::size_t lag = 0;  // delay in steps
  if (tau > 0.0) {
    const double ratio = tau / cfg.dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
      throw InputError(fmt::format("dt = {} does not divide tau = {}", cfg.dt, tau));
    if (rounded < kMinStepsPerDelay)
      throw InputError(fmt::format("dt = {} gives fewer than {} steps per delay", cfg.dt, kMinStepsPerDelay));
    lag = static_cast<std::size_t>(rounded);
  }
  const double steps_real = cfg.t_end / cfg.dt;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real))
    throw InputError("dt must divide t_end");

  Trajectory traj;
  traj.mode = cfg.mode;
  traj.tau = tau;
  traj.times.resize(steps + 1);
  traj.states = Matrix(steps + 1, n);
  std::copy(cfg.initial_state.begin(), cfg.initial_state.end(), traj.states.row(0).begin());
  for (std::size_t k = 0; k <= steps; ++k) traj.times[k] = static_cast<double>(k) * cfg.dt;

  DelayedSis model(net, cfg.mode);
  const bool nonlinear = cfg.mode == DynamicsMode::Nonlinear;

  // Derivative history: slope[k] = f(p(t_k - tau)), the right derivative on
  // [t_k, t_k+1] at t_k.
  Matrix slope(steps + 1, n);
  std::vector<double> hist(n), hist_next(n), mid(n), stage(n), k1(n), k2(n), k3(n), k4(n);

  auto history_at = [&](double t, std::span<double> out) {
    if (cfg.history) {
      cfg.history(t, out);
    } else {
      std::copy(cfg.initial_state.begin(), cfg.initial_state.end(), out.begin());
    }
  };

  // p at grid index j (may be negative: j * dt in [-tau, 0)).
  auto grid_state = [&](long long j, std::span<double> out) {
    if (j >= 0) {
      auto r = traj.states.row(static_cast<std::size_t>(j));
      std::copy(r.begin(), r.end(), out.begin());
    } else {
      history_at(static_cast<double>(j) * cfg.dt, out);
    }
  };

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = traj.times[k];
    if (lag == 0) {
      auto p = traj.states.row(k);
      model.rhs(p, k1);
      for (std::size_t i = 0; i < n; ++i) stage[i] = p[i] + 0.5 * cfg.dt * k1[i];
      model.rhs(stage, k2);
      for (std::size_t i = 0; i < n; ++i) stage[i] = p[i] + 0.5 * cfg.dt * k2[i];
      model.rhs(stage, k3);
      for (std::size_t i = 0; i < n; ++i) stage[i] = p[i] + cfg.dt * k3[i];
      model.rhs(stage, k4);
      auto s = slope.row(k);
      std::copy(k1.begin(), k1.end(), s.begin());
    } else {
      const long long j0 = static_cast<long long>(k) - static_cast<long long>(lag);
      grid_state(j0, hist);
      grid_state(j0 + 1, hist_next);
      if (j0 >= 0) {
        // Cubic Hermite on [t_j0, t_j0+1] using the stored right/left slopes.
        // lag >= kMinStepsPerDelay, so both slopes are already stored.
        auto d0 = slope.row(static_cast<std::size_t>(j0));
        auto d1 = slope.row(static_cast<std::size_t>(j0) + 1);
        for (std::size_t i = 0; i < n; ++i)
          mid[i] = 0.5 * (hist[i] + hist_next[i]) + 0.125 * cfg.dt * (d0[i] - d1[i]);
      } else if (cfg.history) {
        history_at(t + 0.5 * cfg.dt - tau, mid);
      } else {
        std::copy(cfg.initial_state.begin(), cfg.initial_state.end(), mid.begin());
      }
      model.rhs(hist, k1);
      model.rhs(mid, k2);
      std::copy(k2.begin(), k2.end(), k3.begin());
      model.rhs(hist_next, k4);
      auto s = slope.row(k);
      std::copy(k1.begin(), k1.end(), s.begin());
    }

    auto p = traj.states.row(k);
    auto next = traj.states.row(k + 1);
    for (std::size_t i = 0; i < n; ++i) next[i] = p[i] + cfg.dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (nonlinear) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!(next[i] >= -0.5 && next[i] <= 1.5))
          throw StabilityError(fmt::format("state of node {} left [-0.5, 1.5] at t = {}", i + 1, t + cfg.dt));
        if (next[i] < 0.0) {
          next[i] = 0.0;
          ++traj.clamp_events;
        } else if (next[i] > 1.0) {
          next[i] = 1.0;
          ++traj.clamp_events;
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(next[i])) throw StabilityError("linearized trajectory overflowed");
    }
  }

  traj.average_infection.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    double s = 0.0;
    for (double v : traj.states.row(k)) s += v;
    traj.average_infection[k] = s / static_cast<double>(n);
  }
  const auto peak = std::max_element(traj.average_infection.begin(), traj.average_infection.end());
  traj.peak_height = *peak;
  traj.peak_time = traj.times[static_cast<std::size_t>(peak - traj.average_infection.begin())];
  return traj;
}

std::vector<double> random_initial_state(std::size_t n, double max_level, std::uint64_t seed) {
  if (!(max_level >= 0.0 && max_level <= 1.0)) throw InputError("initial infection level must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::vector<double> p(n);
  // Explicit transform instead of uniform_real_distribution keeps the stream
  // identical across standard libraries.
  for (double& v : p) v = max_level * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  return p;
}

DecayEstimate decay_rate_estimate(const Trajectory& traj, double window) {
  if (!(window > 0.0 && window <= 1.0)) throw InputError("window must lie in (0, 1]");
  DecayEstimate est;
  const std::size_t total = traj.times.size();
  if (total < 3) throw InputError("trajectory too short for a decay estimate");
  const std::size_t first = total - std::max<std::size_t>(3, static_cast<std::size_t>(window * static_cast<double>(total)));
  const auto& pbar = traj.average_infection;

  bool all_zero = true;
  bool has_pos = false;
  bool has_neg = false;
  for (std::size_t k = first; k < total; ++k) {
    if (pbar[k] != 0.0) all_zero = false;
    if (pbar[k] > 0.0) has_pos = true;
    if (pbar[k] < 0.0) has_neg = true;
  }
  if (all_zero) {
    est.zero_tail = true;
    est.slope = -std::numeric_limits<double>::infinity();
    return est;
  }

  std::vector<double> xs, ys;
  est.oscillatory = has_pos && has_neg;
  for (std::size_t k = first; k < total; ++k) {
    const double v = std::abs(pbar[k]);
    if (est.oscillatory) {
      if (k == first || k + 1 == total) continue;
      if (!(v > 0.0 && v >= std::abs(pbar[k - 1]) && v > std::abs(pbar[k + 1]))) continue;
    } else if (v == 0.0) {
      continue;
    }
    xs.push_back(traj.times[k]);
    ys.push_back(std::log(v));
  }
  if (xs.size() < 2) {
    if (est.oscillatory) {
      // Fewer than two envelope peaks: fall back to the endpoints.
      xs = {traj.times[first], traj.times[total - 1]};
      ys = {std::log(std::max(std::abs(pbar[first]), 1e-300)), std::log(std::max(std::abs(pbar[total - 1]), 1e-300))};
    } else {
      est.zero_tail = true;
      est.slope = -std::numeric_limits<double>::infinity();
      return est;
    }
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  est.slope = sxy / sxx;
  est.growing = est.slope > 0.0;
  return est;
}

std::string trajectory_csv(const Trajectory& traj) {
  const std::size_t n = traj.states.cols();
  std::string out = "t";
  for (std::size_t i = 0; i < n; ++i) out += fmt::format(",p_{}", i + 1);
  out += ",p_bar\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out += fmt::format("{:.17g}", traj.times[k]);
    for (double v : traj.states.row(k)) out += fmt::format(",{:.17g}", v);
    out += fmt::format(",{:.17g}\n", traj.average_infection[k]);
  }
  return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  out << trajectory_csv(traj);
}

}  // namespace delaynet
