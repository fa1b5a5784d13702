#pragma once

#include <vector>

#include "qaction/model.hpp"

namespace qaction {

struct PathSettings {
  /// Number of time intervals; 0 selects default_slice_count(T).
  int slices = 0;
  int max_iterations = 200;
  /// Convergence threshold on the discrete Euler-Lagrange residual,
  /// relative to max(1, max |grad V|).
  double residual_tolerance = 1e-10;
  /// Also start from bumped guesses when the potential is not convex or the
  /// straight-line solution is a saddle, and keep the lowest-action minimum.
  bool multistart = true;
};

/// 400 slices up to T = 4, growing in proportion to T beyond.
int default_slice_count(double transition_time);

/// Discretized Euclidean path between fixed endpoints, slices at t_k = kT/N.
struct TrajectoryBV {
  ActionSpec action;
  double duration = 0.0;
  std::vector<Point> slices;
  int iterations = 0;
  /// Max-norm of (m/dt^2)(x_{k+1} - 2x_k + x_{k-1}) - grad V(x_k).
  double residual = 0.0;

  int intervals() const noexcept { return static_cast<int>(slices.size()) - 1; }
  double time_step() const noexcept { return duration / intervals(); }
};

/// Damped Newton minimization of the discrete Euclidean action with a
/// block-tridiagonal Hessian. Raises ConjugatePoint if no candidate ends at a
/// positive-definite Hessian and NoConvergence on the iteration cap.
TrajectoryBV solve_euclidean_path(const ActionSpec& action, Point x_in, Point x_fi, double transition_time,
                                  const PathSettings& settings = {},
                                  const std::vector<Point>* initial_guess = nullptr);

/// Kinetic term by forward differences plus trapezoidal potential term.
double euclidean_action(const ActionSpec& action, double transition_time, const std::vector<Point>& slices);
double euclidean_action(const TrajectoryBV& trajectory);

/// Spread of the Euclidean conserved quantity (m/2)|v|^2 - V over interior
/// slices, relative to max(1, |mean|).
double path_energy_residual(const TrajectoryBV& trajectory);

/// Max-norm of the discrete Euler-Lagrange residual for arbitrary slices.
double euler_lagrange_residual(const ActionSpec& action, double transition_time, const std::vector<Point>& slices);

/// Whether the discrete second variation at `slices` is positive definite.
bool hessian_positive_definite(const ActionSpec& action, double transition_time, const std::vector<Point>& slices);

/// Partial derivatives of the discrete action with respect to the mass and
/// the potential's monomial coefficients, at fixed slices. At a stationary
/// path these are the total derivatives of the minimal action (the endpoint
/// terms vanish because the endpoints are fixed).
///
/// `potential` is ordered (v0, v2, v4) in 1-D and (v0, v2, v22, v4) in 2-D.
struct ActionSensitivity {
  double mass = 0.0;
  std::vector<double> potential;
};

ActionSensitivity action_sensitivity(const TrajectoryBV& trajectory);

}  // namespace qaction
