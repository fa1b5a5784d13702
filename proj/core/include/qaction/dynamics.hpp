#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qaction/model.hpp"

namespace qaction {

/// Point in the phase space of a 2-D action; p = m dq/dt.
struct PhaseState {
  double x = 0.0;
  double y = 0.0;
  double px = 0.0;
  double py = 0.0;

  friend bool operator==(const PhaseState&, const PhaseState&) = default;
};

/// (px^2 + py^2) / (2m) + V(x, y)
double energy_of_state(const ActionSpec& action, const PhaseState& s);

/// `n` states on the section plane y = 0 with energy E: x and px are drawn
/// uniformly over the accessible rectangle and rejected unless the remaining
/// py^2 is positive; py is then the positive root. Deterministic in `seed`.
/// Throws EmptyShell if E lies below the potential on the plane.
std::vector<PhaseState> sample_energy_shell(const ActionSpec& action, double energy, std::size_t n,
                                            std::uint64_t seed);

/// One classical RK4 step of Hamilton's equations.
PhaseState rk4_step(const ActionSpec& action, const PhaseState& s, double dt);

struct PhaseTrajectory {
  std::vector<double> times;
  std::vector<PhaseState> states;
};

/// Fixed-step RK4 from t = 0 to t_max, the last step shortened to land on
/// t_max. Every `stride`-th state is recorded, plus the final one. Throws
/// Overflow if any component exceeds 1e12.
PhaseTrajectory integrate_rk4(const ActionSpec& action, const PhaseState& s0, double dt, double t_max,
                              std::size_t stride = 1);

/// Integrates t_max forward and returns the final state only.
PhaseState propagate(const ActionSpec& action, const PhaseState& s0, double dt, double t_max);

struct SectionPoint {
  double x = 0.0;
  double px = 0.0;
};

struct SectionSettings {
  double dt = 1e-3;
  std::size_t max_crossings = 300;
  double time_cap = 5e4;
  /// Trajectories whose relative energy error at any crossing exceeds this
  /// are flagged in the output.
  double drift_flag = 1e-6;
};

struct SectionTrajectory {
  PhaseState initial;
  std::vector<SectionPoint> crossings;
  /// Largest |E(state) - E| / |E| over the recorded crossings.
  double max_energy_error = 0.0;
  /// Largest |y| at a recorded crossing (zero by construction of the landing step).
  double max_plane_offset = 0.0;
  bool drift_flagged = false;
};

/// Crossings of the plane y = 0 in the direction dy/dt > 0.
struct PoincareSectionData {
  double energy = 0.0;
  ActionSpec action;
  std::optional<TemperaturePoint> temperature;
  SectionSettings settings;
  std::vector<SectionTrajectory> trajectories;

  std::size_t total_crossings() const noexcept;
};

/// Integrates each state with RK4 and, on every upward sign change of y,
/// lands exactly on y = 0 by one RK4 step in y as the independent variable
/// (Henon's trick). Throws TooFewCrossings if a trajectory records fewer
/// than two crossings before the time cap, InvalidArgument if an initial
/// state is off the energy shell by more than 1e-9.
PoincareSectionData poincare_section(const ActionSpec& action, std::span<const PhaseState> initial_states,
                                     double energy, const SectionSettings& settings = {});

struct LyapunovSettings {
  double dt = 1e-3;
  double t_max = 2000.0;
  double renorm_interval = 1.0;
  double initial_separation = 1e-8;
  /// Classification threshold on lambda_max.
  double chaos_threshold = 0.01;
};

struct LyapunovEstimate {
  double lambda_max = 0.0;
  /// Running estimate after each renormalization epoch.
  std::vector<double> history;
  /// max - min of the running estimate over the last quarter of the epochs.
  double last_quartile_spread = 0.0;
  LyapunovSettings settings;

  bool chaotic() const noexcept { return lambda_max > settings.chaos_threshold; }
};

/// Two-trajectory estimate of the largest Lyapunov exponent: a companion
/// displaced in x is renormalized to the initial phase-space separation
/// every renorm_interval and the log stretch factors are averaged over time.
LyapunovEstimate lyapunov_max(const ActionSpec& action, const PhaseState& s0, const LyapunovSettings& settings = {});

struct TwoSampleTest {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
TwoSampleTest ks_two_sample(std::span<const double> a, std::span<const double> b);

}  // namespace qaction
