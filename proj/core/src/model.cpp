#include "qaction/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qaction/error.hpp"

namespace qaction {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveTime: return "NonPositiveTime";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::OffGrid: return "OffGrid";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::NegativeKernel: return "NegativeKernel";
    case ErrorCode::Underflow: return "Underflow";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::ConjugatePoint: return "ConjugatePoint";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::PathFailure: return "PathFailure";
    case ErrorCode::NoDoubleWell: return "NoDoubleWell";
    case ErrorCode::MissingEntry: return "MissingEntry";
    case ErrorCode::EmptyShell: return "EmptyShell";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::TooFewCrossings: return "TooFewCrossings";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(ActionKind kind) noexcept {
  return kind == ActionKind::Classical ? "classical" : "quantum";
}

ActionKind action_kind_from_string(std::string_view s) {
  if (s == "classical") return ActionKind::Classical;
  if (s == "quantum") return ActionKind::Quantum;
  fail(ErrorCode::InvalidArgument, "unknown action kind '" + std::string(s) + "'");
}

const Potential1D& ActionSpec::potential_1d() const {
  if (const auto* p = std::get_if<Potential1D>(&potential)) return *p;
  fail(ErrorCode::InvalidArgument, "action is two-dimensional");
}

const Potential2D& ActionSpec::potential_2d() const {
  if (const auto* p = std::get_if<Potential2D>(&potential)) return *p;
  fail(ErrorCode::InvalidArgument, "action is one-dimensional");
}

namespace {

bool all_finite(std::initializer_list<double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void validate(const Potential1D& p) {
  if (!all_finite({p.v0, p.v2, p.v4})) fail(ErrorCode::InvalidArgument, "non-finite potential coefficient");
  if (p.v4 < 0.0) fail(ErrorCode::Unbounded, "v4 must be >= 0 for a potential bounded below");
  if (p.v4 == 0.0 && p.v2 < 0.0) fail(ErrorCode::Unbounded, "v4 = 0 requires v2 >= 0");
}

void validate(const Potential2D& p) {
  if (!all_finite({p.v0, p.v2, p.v22, p.v4})) fail(ErrorCode::InvalidArgument, "non-finite potential coefficient");
  if (p.v22 < 0.0) fail(ErrorCode::Unbounded, "v22 must be >= 0 for a potential bounded below");
  if (p.v4 < 0.0) fail(ErrorCode::Unbounded, "v4 must be >= 0 for a potential bounded below");
  // Along an axis only v2 and v4 survive.
  if (p.v4 == 0.0 && p.v2 < 0.0) fail(ErrorCode::Unbounded, "v4 = 0 requires v2 >= 0");
}

void validate(const ActionSpec& action) {
  if (!(action.mass > 0.0) || !std::isfinite(action.mass)) {
    std::ostringstream os;
    os << "mass must be positive, got " << action.mass;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  std::visit([](const auto& p) { validate(p); }, action.potential);
}

ActionSpec make_action(double mass, Potential potential, ActionKind kind) {
  ActionSpec a{mass, potential, kind};
  validate(a);
  return a;
}

double evaluate_potential(const Potential1D& p, double x) noexcept {
  const double x2 = x * x;
  return p.v0 + x2 * (p.v2 + p.v4 * x2);
}

double evaluate_potential(const Potential2D& p, double x, double y) noexcept {
  const double x2 = x * x;
  const double y2 = y * y;
  return p.v0 + p.v2 * (x2 + y2) + p.v22 * x2 * y2 + p.v4 * (x2 * x2 + y2 * y2);
}

double evaluate_potential(const Potential& p, Point q) noexcept {
  if (const auto* p1 = std::get_if<Potential1D>(&p)) return evaluate_potential(*p1, q.x);
  return evaluate_potential(std::get<Potential2D>(p), q.x, q.y);
}

double potential_gradient(const Potential1D& p, double x) noexcept {
  return x * (2.0 * p.v2 + 4.0 * p.v4 * x * x);
}

Point potential_gradient(const Potential2D& p, double x, double y) noexcept {
  const double x2 = x * x;
  const double y2 = y * y;
  return {x * (2.0 * p.v2 + 2.0 * p.v22 * y2 + 4.0 * p.v4 * x2),
          y * (2.0 * p.v2 + 2.0 * p.v22 * x2 + 4.0 * p.v4 * y2)};
}

Point potential_gradient(const Potential& p, Point q) noexcept {
  if (const auto* p1 = std::get_if<Potential1D>(&p)) return {potential_gradient(*p1, q.x), 0.0};
  return potential_gradient(std::get<Potential2D>(p), q.x, q.y);
}

Hessian2 potential_hessian(const Potential& p, Point q) noexcept {
  if (const auto* p1 = std::get_if<Potential1D>(&p)) {
    return {2.0 * p1->v2 + 12.0 * p1->v4 * q.x * q.x, 0.0, 0.0};
  }
  const auto& p2 = std::get<Potential2D>(p);
  const double x2 = q.x * q.x;
  const double y2 = q.y * q.y;
  return {2.0 * p2.v2 + 2.0 * p2.v22 * y2 + 12.0 * p2.v4 * x2,
          4.0 * p2.v22 * q.x * q.y,
          2.0 * p2.v2 + 2.0 * p2.v22 * x2 + 12.0 * p2.v4 * y2};
}

std::vector<double> potential_minima_1d(const Potential1D& p) {
  if (p.v4 == 0.0 && p.v2 < 0.0) fail(ErrorCode::Unbounded, "v4 = 0 with v2 < 0 has no minimum");
  if (p.v4 < 0.0) fail(ErrorCode::Unbounded, "v4 < 0 has no minimum");
  if (p.v2 < 0.0) {
    const double xm = std::sqrt(-p.v2 / (2.0 * p.v4));
    return {-xm, xm};
  }
  return {0.0};
}

double potential_minimum_value(const Potential& p) {
  if (const auto* p1 = std::get_if<Potential1D>(&p)) {
    const auto minima = potential_minima_1d(*p1);
    return evaluate_potential(*p1, minima.front());
  }
  const auto& p2 = std::get<Potential2D>(p);
  validate(p2);
  if (p2.v2 >= 0.0) return p2.v0;
  // v2 < 0 and v4 > 0: candidates on an axis (x, 0) and on the diagonal (s, s).
  const double axis = p2.v0 - p2.v2 * p2.v2 / (4.0 * p2.v4);
  const double diag_quartic = 2.0 * p2.v4 + p2.v22;
  const double diag = p2.v0 - (2.0 * p2.v2) * (2.0 * p2.v2) / (4.0 * diag_quartic);
  return std::min(axis, diag);
}

TemperaturePoint temperature_of_time(double transition_time, const Conventions& conv) {
  if (!(transition_time > 0.0)) {
    std::ostringstream os;
    os << "transition time must be positive, got " << transition_time;
    fail(ErrorCode::NonPositiveTime, os.str());
  }
  const double beta = transition_time / conv.hbar;
  return {transition_time, beta, 1.0 / (conv.k_boltzmann * beta)};
}

}  // namespace qaction
