#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <variant>
#include <vector>

namespace qaction {

/// Unit conventions. Production code always runs with hbar = k_B = 1; the
/// fields exist so tests can check that the scales are threaded through.
struct Conventions {
  double hbar = 1.0;
  double k_boltzmann = 1.0;
};

/// Position in one or two dimensions; `y` is ignored for 1-D actions.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// V(x) = v0 + v2 x^2 + v4 x^4
struct Potential1D {
  double v0 = 0.0;
  double v2 = 0.0;
  double v4 = 0.0;

  friend bool operator==(const Potential1D&, const Potential1D&) = default;
};

/// V(x,y) = v0 + v2 (x^2 + y^2) + v22 x^2 y^2 + v4 (x^4 + y^4)
///
/// Only monomials that are even in each coordinate and symmetric under x<->y
/// are representable, so parity and exchange symmetry hold by construction.
struct Potential2D {
  double v0 = 0.0;
  double v2 = 0.0;
  double v22 = 0.0;
  double v4 = 0.0;

  friend bool operator==(const Potential2D&, const Potential2D&) = default;
};

using Potential = std::variant<Potential1D, Potential2D>;

enum class ActionKind { Classical, Quantum };

std::string_view to_string(ActionKind kind) noexcept;
ActionKind action_kind_from_string(std::string_view s);

/// Euclidean action  S_E = \int dt [ (m/2) |dx/dt|^2 + V(x) ].
struct ActionSpec {
  double mass = 1.0;
  Potential potential = Potential1D{};
  ActionKind kind = ActionKind::Classical;

  int dim() const noexcept { return std::holds_alternative<Potential1D>(potential) ? 1 : 2; }
  const Potential1D& potential_1d() const;
  const Potential2D& potential_2d() const;

  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

/// Throws Unbounded / InvalidArgument when the action is not bounded below
/// or has a non-positive mass.
void validate(const Potential1D& p);
void validate(const Potential2D& p);
void validate(const ActionSpec& action);

ActionSpec make_action(double mass, Potential potential,
                       ActionKind kind = ActionKind::Classical);

/// Second derivatives of a potential at a point (symmetric 2x2; only `xx`
/// is meaningful in 1-D).
struct Hessian2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;
};

double evaluate_potential(const Potential1D& p, double x) noexcept;
double evaluate_potential(const Potential2D& p, double x, double y) noexcept;
double evaluate_potential(const Potential& p, Point q) noexcept;

double potential_gradient(const Potential1D& p, double x) noexcept;
Point potential_gradient(const Potential2D& p, double x, double y) noexcept;
Point potential_gradient(const Potential& p, Point q) noexcept;

Hessian2 potential_hessian(const Potential& p, Point q) noexcept;

/// Stationary minima of a 1-D quartic well: {-x_m, +x_m} for a double well,
/// {0} otherwise. Throws Unbounded for v4 = 0, v2 < 0.
std::vector<double> potential_minima_1d(const Potential1D& p);

/// Minimum value of the potential over the whole configuration space.
double potential_minimum_value(const Potential& p);

/// Euclidean duration T mapped onto inverse temperature and temperature.
struct TemperaturePoint {
  double transition_time = 1.0;
  double beta = 1.0;
  double tau = 1.0;
};

/// beta = T / hbar, tau = 1 / (k_B beta). Throws NonPositiveTime for T <= 0.
TemperaturePoint temperature_of_time(double transition_time, const Conventions& conv = {});

}  // namespace qaction
