#include "qaction/instanton.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "qaction/error.hpp"

namespace qaction {

namespace {

struct Well {
  double mass;
  double v4;
  double xm;

  // V(x) - V(x_m) = v4 (x^2 - x_m^2)^2, written in factored form so the
  // difference does not cancel near the minimum.
  double barrier(double x) const {
    const double f = (x - xm) * (x + xm);
    return v4 * f * f;
  }
  double speed(double x) const { return std::sqrt(2.0 * barrier(x) / mass); }
};

Well well_of(const ActionSpec& action) {
  if (action.dim() != 1) fail(ErrorCode::NoDoubleWell, "instantons are computed for 1-D actions");
  validate(action);
  const auto& p = action.potential_1d();
  if (!(p.v2 < 0.0 && p.v4 > 0.0)) {
    std::ostringstream os;
    os << "potential has no degenerate double minimum (v2=" << p.v2 << ", v4=" << p.v4 << ")";
    fail(ErrorCode::NoDoubleWell, os.str());
  }
  return {action.mass, p.v4, std::sqrt(-p.v2 / (2.0 * p.v4))};
}

double simpson(const std::function<double(double)>& f, double a, double fa, double b, double fb, double fm,
               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, fa, b, fb, fm, whole, tol, 60);
}

// x >= 0 with t(x) = target, given a point (x0, t0) on the curve below it.
double invert_time(const Well& w, double target, double x0, double t0) {
  const auto inv_speed = [&w](double x) { return 1.0 / w.speed(x); };
  double lo = x0;
  double t_lo = t0;
  double hi = w.xm;
  double x = x0;
  double t_x = t0;
  for (int it = 0; it < 200; ++it) {
    const double residual = t_x - target;
    if (std::abs(residual) <= 1e-14 * std::max(1.0, target)) break;
    // Newton step on t(x) = target with dt/dx = 1/speed, kept in the bracket.
    double next = x - residual * w.speed(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double t_next = t_lo + integrate(inv_speed, lo, next, 1e-15);
    if (t_next < target) {
      lo = next;
      t_lo = t_next;
    } else {
      hi = next;
    }
    x = next;
    t_x = t_next;
    if (hi - lo <= 1e-16 * w.xm) break;
  }
  return x;
}

}  // namespace

std::vector<double> default_instanton_times(const ActionSpec& action) {
  const Well w = well_of(action);
  const double rate = w.xm * std::sqrt(2.0 * w.v4 / w.mass);
  const double half_span = 8.0 / rate;
  constexpr int n = 801;
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = -half_span + 2.0 * half_span * i / (n - 1);
  t[n / 2] = 0.0;
  return t;
}

InstantonProfile find_instanton(const ActionSpec& action, std::span<const double> times) {
  const Well w = well_of(action);
  InstantonProfile out;
  out.action = action;
  out.asymptote = w.xm;
  out.rate = w.xm * std::sqrt(2.0 * w.v4 / w.mass);
  out.times.assign(times.begin(), times.end());
  out.positions.assign(times.size(), 0.0);

  // Solve at |t| in ascending order, continuing the quadrature from the last root.
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(times[a]) < std::abs(times[b]); });
  double x_prev = 0.0;
  double t_prev = 0.0;
  for (std::size_t idx : order) {
    const double t = std::abs(times[idx]);
    double x = 0.0;
    if (t > 0.0) {
      x = invert_time(w, t, x_prev, t_prev);
      x_prev = x;
      t_prev = t;
    }
    out.positions[idx] = times[idx] < 0.0 ? -x : x;
  }
  return out;
}

InstantonProfile find_instanton(const ActionSpec& action) {
  const auto t = default_instanton_times(action);
  return find_instanton(action, t);
}

InstantonAction instanton_action(const InstantonProfile& profile) {
  const Well w = well_of(profile.action);
  InstantonAction out;
  out.value = std::sqrt(2.0 * w.mass * w.v4) * (4.0 / 3.0) * w.xm * w.xm * w.xm;
  // m xdot^2 = 2 (V - V_m) on the zero-energy orbit.
  const auto& t = profile.times;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double a = 2.0 * w.barrier(profile.positions[i]);
    const double b = 2.0 * w.barrier(profile.positions[i + 1]);
    sum += 0.5 * (a + b) * (t[i + 1] - t[i]);
  }
  out.quadrature = sum;
  return out;
}

InstantonProfile quantum_instanton(const ParameterFlow& flow, double transition_time) {
  for (const auto& e : flow.entries) {
    if (std::abs(e.transition_time - transition_time) > 1e-9 * std::max(1.0, transition_time)) continue;
    if (!e.fit) break;
    auto profile = find_instanton(e.fit->quantum_action);
    profile.temperature = e.fit->temperature;
    return profile;
  }
  std::ostringstream os;
  os << "flow has no fitted entry at T=" << transition_time;
  fail(ErrorCode::MissingEntry, os.str());
}

}  // namespace qaction
