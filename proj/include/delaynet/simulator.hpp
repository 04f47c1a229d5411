#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "delaynet/linalg.hpp"
#include "delaynet/network.hpp"

namespace delaynet {

enum class DynamicsMode { Nonlinear, Linearized };

std::string_view to_string(DynamicsMode mode);
DynamicsMode parse_dynamics_mode(std::string_view text);

// History on [-tau, 0]: writes p(t) into `out` for t <= 0.
using HistoryFunction = std::function<void(double t, std::span<double> out)>;

struct TrajectoryConfig {
  double t_end = 10.0;
  double dt = 0.01;
  std::vector<double> initial_state;
  // Empty: constant initial_state on [-tau, 0].
  HistoryFunction history;
  DynamicsMode mode = DynamicsMode::Nonlinear;
};

struct Trajectory {
  std::vector<double> times;
  Matrix states;  // row k = p(times[k])
  std::vector<double> average_infection;
  double peak_height = 0.0;
  double peak_time = 0.0;
  std::size_t clamp_events = 0;
  DynamicsMode mode = DynamicsMode::Nonlinear;
  double tau = 0.0;
};

// Fixed-step RK4 on the method-of-steps grid. The step must divide the delay
// into at least kMinStepsPerDelay pieces; delayed states at RK midpoints come
// from cubic Hermite interpolation of the stored grid. Nonlinear trajectories
// are clamped to [0, 1] and each clamped component is counted.
// Throws InputError on configuration errors and StabilityError if a nonlinear
// state leaves [-0.5, 1.5] before clamping.
Trajectory simulate(const EpidemicNetwork& net, const TrajectoryConfig& cfg);

inline constexpr int kMinStepsPerDelay = 20;

// "randomly infected": p_i(0) ~ U(0, max_level), reproducible from the seed.
std::vector<double> random_initial_state(std::size_t n, double max_level, std::uint64_t seed);

struct DecayEstimate {
  double slope = 0.0;          // least-squares slope of log(envelope)
  bool zero_tail = false;      // tail vanished; slope is -inf
  bool oscillatory = false;    // p_bar changes sign in the window
  bool growing = false;        // slope > 0
};

// Fits log|p_bar| over the last `window` fraction of the trajectory. When the
// average changes sign, the fit uses the local maxima of |p_bar| instead.
DecayEstimate decay_rate_estimate(const Trajectory& traj, double window = 0.5);

// CSV with columns t, p_1..p_n, p_bar at 17 significant digits.
std::string trajectory_csv(const Trajectory& traj);
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

}  // namespace delaynet
