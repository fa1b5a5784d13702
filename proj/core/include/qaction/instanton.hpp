#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qaction/fit.hpp"
#include "qaction/model.hpp"

namespace qaction {

/// Zero-energy kink of a 1-D double well in imaginary time, centered so
/// that x(0) = 0 and running from -x_m to +x_m.
struct InstantonProfile {
  ActionSpec action;
  std::vector<double> times;
  std::vector<double> positions;
  double asymptote = 0.0;  // x_m
  double rate = 0.0;       // omega_inst = x_m sqrt(2 v4 / m)
  /// Transition time of the quantum action this profile belongs to; empty
  /// for the classical action (the T -> 0 end of the flow).
  std::optional<TemperaturePoint> temperature;
};

/// Uniform grid on [-8/omega, 8/omega] with 801 points.
std::vector<double> default_instanton_times(const ActionSpec& action);

/// Solves dx/dt = sqrt((2/m)(V(x) - V(x_m))) from x(0) = 0 by inverting the
/// adaptive quadrature t(x) = \int_0^x dx' / sqrt(...). Throws NoDoubleWell
/// unless v2 < 0 and v4 > 0.
InstantonProfile find_instanton(const ActionSpec& action, std::span<const double> times);
InstantonProfile find_instanton(const ActionSpec& action);

struct InstantonAction {
  /// sqrt(2 m v4) (4/3) x_m^3
  double value = 0.0;
  /// Trapezoidal \int m (dx/dt)^2 dt over the profile's time grid.
  double quadrature = 0.0;
};

InstantonAction instanton_action(const InstantonProfile& profile);

/// Instanton of the quantum action fitted at `transition_time`. Throws
/// MissingEntry when the flow has no successful fit there and NoDoubleWell
/// when that fit has no degenerate minima.
InstantonProfile quantum_instanton(const ParameterFlow& flow, double transition_time);

}  // namespace qaction
