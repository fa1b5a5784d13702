#include "qaction/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "qaction/error.hpp"

namespace qaction {

namespace {

constexpr double kOverflow = 1e12;

struct Flow {
  double mass;
  Potential2D v;

  double potential(double x, double y) const { return evaluate_potential(v, x, y); }
  double dvdx(double x, double y) const { return 2.0 * x * (v.v2 + v.v22 * y * y + 2.0 * v.v4 * x * x); }
  double dvdy(double x, double y) const { return 2.0 * y * (v.v2 + v.v22 * x * x + 2.0 * v.v4 * y * y); }

  PhaseState rate(const PhaseState& s) const {
    return {s.px / mass, s.py / mass, -dvdx(s.x, s.y), -dvdy(s.x, s.y)};
  }

  PhaseState step(const PhaseState& s, double h) const {
    const auto at = [&s](const PhaseState& k, double c) {
      return PhaseState{s.x + c * k.x, s.y + c * k.y, s.px + c * k.px, s.py + c * k.py};
    };
    const PhaseState k1 = rate(s);
    const PhaseState k2 = rate(at(k1, 0.5 * h));
    const PhaseState k3 = rate(at(k2, 0.5 * h));
    const PhaseState k4 = rate(at(k3, h));
    const double w = h / 6.0;
    return {s.x + w * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x), s.y + w * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
            s.px + w * (k1.px + 2.0 * k2.px + 2.0 * k3.px + k4.px),
            s.py + w * (k1.py + 2.0 * k2.py + 2.0 * k3.py + k4.py)};
  }

  double energy(const PhaseState& s) const {
    return (s.px * s.px + s.py * s.py) / (2.0 * mass) + potential(s.x, s.y);
  }

  // One RK4 step of size h in y for (x, px, py), with y as the independent
  // variable: d/dy = (m / py) d/dt.
  PhaseState step_in_y(const PhaseState& s, double h) const {
    using V3 = std::array<double, 3>;
    const auto f = [this](double y, const V3& u) -> V3 {
      const double g = mass / u[2];
      return {u[1] / mass * g, -dvdx(u[0], y) * g, -dvdy(u[0], y) * g};
    };
    const auto add = [](const V3& u, const V3& k, double c) -> V3 {
      return {u[0] + c * k[0], u[1] + c * k[1], u[2] + c * k[2]};
    };
    const V3 u{s.x, s.px, s.py};
    const V3 k1 = f(s.y, u);
    const V3 k2 = f(s.y + 0.5 * h, add(u, k1, 0.5 * h));
    const V3 k3 = f(s.y + 0.5 * h, add(u, k2, 0.5 * h));
    const V3 k4 = f(s.y + h, add(u, k3, h));
    V3 out;
    for (int i = 0; i < 3; ++i) out[i] = u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return {out[0], s.y + h, out[1], out[2]};
  }
};

Flow flow_of(const ActionSpec& action) {
  if (action.dim() != 2) fail(ErrorCode::InvalidArgument, "phase-space dynamics needs a 2-D action");
  validate(action);
  return {action.mass, action.potential_2d()};
}

void check_finite(const PhaseState& s, double t) {
  const double m = std::max({std::abs(s.x), std::abs(s.y), std::abs(s.px), std::abs(s.py)});
  if (!(m <= kOverflow)) {
    std::ostringstream os;
    os << "trajectory escaped (|state| = " << m << ") at t = " << t;
    fail(ErrorCode::Overflow, os.str());
  }
}

double separation(const PhaseState& a, const PhaseState& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dpx = a.px - b.px;
  const double dpy = a.py - b.py;
  return std::sqrt(dx * dx + dy * dy + dpx * dpx + dpy * dpy);
}

std::int64_t steps_for(double duration, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::InvalidArgument, "time step must be positive");
  if (!(duration >= dt)) fail(ErrorCode::InvalidArgument, "integration time must be at least one step");
  return static_cast<std::int64_t>(std::ceil(duration / dt - 1e-9));
}

}  // namespace

double energy_of_state(const ActionSpec& action, const PhaseState& s) { return flow_of(action).energy(s); }

std::vector<PhaseState> sample_energy_shell(const ActionSpec& action, double energy, std::size_t n,
                                            std::uint64_t seed) {
  const Flow f = flow_of(action);
  if (n == 0) fail(ErrorCode::InvalidArgument, "need at least one sample");
  // On y = 0 the potential is v0 + v2 u + v4 u^2 with u = x^2.
  const auto& v = f.v;
  double u_min = 0.0;
  if (v.v2 < 0.0) u_min = -v.v2 / (2.0 * v.v4);
  const double v_min = v.v0 + v.v2 * u_min + v.v4 * u_min * u_min;
  if (!(energy > v_min)) {
    std::ostringstream os;
    os << "energy " << energy << " is not above the potential minimum " << v_min << " on the section plane";
    fail(ErrorCode::EmptyShell, os.str());
  }
  double u_max = 0.0;
  if (v.v4 > 0.0) {
    const double c = v.v0 - energy;
    u_max = (-v.v2 + std::sqrt(v.v2 * v.v2 - 4.0 * v.v4 * c)) / (2.0 * v.v4);
  } else if (v.v2 > 0.0) {
    u_max = (energy - v.v0) / v.v2;
  } else {
    fail(ErrorCode::EmptyShell, "energy shell is unbounded on the section plane");
  }
  const double x_max = std::sqrt(u_max);
  const double p_max = std::sqrt(2.0 * f.mass * (energy - v_min));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<PhaseState> out;
  out.reserve(n);
  const std::size_t max_draws = 1000 * n + 10000;
  for (std::size_t draw = 0; draw < max_draws && out.size() < n; ++draw) {
    const double x = x_max * unit(rng);
    const double px = p_max * unit(rng);
    const double radicand = 2.0 * f.mass * (energy - f.potential(x, 0.0)) - px * px;
    if (radicand <= 1e-12 * 2.0 * f.mass * std::abs(energy)) continue;
    out.push_back({x, 0.0, px, std::sqrt(radicand)});
  }
  if (out.size() < n) fail(ErrorCode::EmptyShell, "energy shell sampling found too few admissible states");
  return out;
}

PhaseState rk4_step(const ActionSpec& action, const PhaseState& s, double dt) { return flow_of(action).step(s, dt); }

PhaseTrajectory integrate_rk4(const ActionSpec& action, const PhaseState& s0, double dt, double t_max,
                              std::size_t stride) {
  const Flow f = flow_of(action);
  const std::int64_t steps = steps_for(t_max, dt);
  if (stride == 0) stride = 1;
  PhaseTrajectory out;
  out.times.push_back(0.0);
  out.states.push_back(s0);
  PhaseState s = s0;
  for (std::int64_t k = 1; k <= steps; ++k) {
    const double t = k == steps ? t_max : static_cast<double>(k) * dt;
    const double h = t - static_cast<double>(k - 1) * dt;
    s = f.step(s, h);
    check_finite(s, t);
    if (k == steps || static_cast<std::size_t>(k) % stride == 0) {
      out.times.push_back(t);
      out.states.push_back(s);
    }
  }
  return out;
}

PhaseState propagate(const ActionSpec& action, const PhaseState& s0, double dt, double t_max) {
  const Flow f = flow_of(action);
  const std::int64_t steps = steps_for(t_max, dt);
  PhaseState s = s0;
  for (std::int64_t k = 1; k <= steps; ++k) {
    const double h = k == steps ? t_max - static_cast<double>(k - 1) * dt : dt;
    s = f.step(s, h);
    if (k % 1024 == 0 || k == steps) check_finite(s, static_cast<double>(k) * dt);
  }
  return s;
}

std::size_t PoincareSectionData::total_crossings() const noexcept {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.crossings.size();
  return n;
}

PoincareSectionData poincare_section(const ActionSpec& action, std::span<const PhaseState> initial_states,
                                     double energy, const SectionSettings& settings) {
  const Flow f = flow_of(action);
  if (!(settings.dt > 0.0) || settings.max_crossings == 0 || !(settings.time_cap > settings.dt))
    fail(ErrorCode::InvalidArgument, "invalid section settings");
  const double scale = std::max(1.0, std::abs(energy));
  PoincareSectionData out;
  out.energy = energy;
  out.action = action;
  out.settings = settings;
  const auto max_steps = static_cast<std::int64_t>(std::ceil(settings.time_cap / settings.dt));

  for (std::size_t traj = 0; traj < initial_states.size(); ++traj) {
    const PhaseState& s0 = initial_states[traj];
    if (std::abs(f.energy(s0) - energy) > 1e-9 * scale) {
      std::ostringstream os;
      os << "initial state " << traj << " has energy " << f.energy(s0) << ", expected " << energy;
      fail(ErrorCode::InvalidArgument, os.str());
    }
    SectionTrajectory rec;
    rec.initial = s0;
    PhaseState prev = s0;
    for (std::int64_t k = 1; k <= max_steps && rec.crossings.size() < settings.max_crossings; ++k) {
      const PhaseState cur = f.step(prev, settings.dt);
      if (k % 1024 == 0) check_finite(cur, static_cast<double>(k) * settings.dt);
      if (prev.y < 0.0 && cur.y >= 0.0) {
        const PhaseState hit = cur.y == 0.0 ? cur : f.step_in_y(cur, -cur.y);
        if (hit.py > 0.0) {
          rec.crossings.push_back({hit.x, hit.px});
          const double err = std::abs(f.energy(hit) - energy) / scale;
          rec.max_energy_error = std::max(rec.max_energy_error, err);
          rec.max_plane_offset = std::max(rec.max_plane_offset, std::abs(hit.y));
        }
      }
      prev = cur;
    }
    if (rec.crossings.size() < 2) {
      std::ostringstream os;
      os << "trajectory " << traj << " crossed the section " << rec.crossings.size() << " time(s) within t = "
         << settings.time_cap;
      fail(ErrorCode::TooFewCrossings, os.str());
    }
    rec.drift_flagged = rec.max_energy_error > settings.drift_flag;
    out.trajectories.push_back(std::move(rec));
  }
  return out;
}

LyapunovEstimate lyapunov_max(const ActionSpec& action, const PhaseState& s0, const LyapunovSettings& settings) {
  const Flow f = flow_of(action);
  if (!(settings.renorm_interval >= settings.dt) || !(settings.t_max >= 4.0 * settings.renorm_interval) ||
      !(settings.initial_separation > 0.0))
    fail(ErrorCode::InvalidArgument, "invalid Lyapunov settings");
  const std::int64_t per_epoch = steps_for(settings.renorm_interval, settings.dt);
  const double epoch_time = static_cast<double>(per_epoch) * settings.dt;
  const auto epochs = static_cast<std::int64_t>(std::llround(settings.t_max / epoch_time));
  const double d0 = settings.initial_separation;

  LyapunovEstimate out;
  out.settings = settings;
  out.history.reserve(static_cast<std::size_t>(epochs));
  PhaseState ref = s0;
  PhaseState comp = s0;
  comp.x += d0;
  double log_sum = 0.0;
  for (std::int64_t e = 1; e <= epochs; ++e) {
    for (std::int64_t k = 0; k < per_epoch; ++k) {
      ref = f.step(ref, settings.dt);
      comp = f.step(comp, settings.dt);
    }
    check_finite(ref, static_cast<double>(e) * epoch_time);
    const double d = separation(ref, comp);
    if (!(d > 0.0)) fail(ErrorCode::InvalidArgument, "companion trajectory collapsed onto the reference");
    log_sum += std::log(d / d0);
    const double c = d0 / d;
    comp = {ref.x + c * (comp.x - ref.x), ref.y + c * (comp.y - ref.y), ref.px + c * (comp.px - ref.px),
            ref.py + c * (comp.py - ref.py)};
    out.history.push_back(log_sum / (static_cast<double>(e) * epoch_time));
  }
  out.lambda_max = out.history.back();
  const std::size_t q = out.history.size() - out.history.size() / 4;
  const auto [lo, hi] = std::minmax_element(out.history.begin() + static_cast<std::ptrdiff_t>(q), out.history.end());
  out.last_quartile_spread = *hi - *lo;
  return out;
}

TwoSampleTest ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidArgument, "two-sample test needs non-empty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  // Kolmogorov tail Q(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2).
  double q = 0.0;
  if (lambda < 0.2) {
    q = 1.0;
  } else {
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
      const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
      q += term;
      if (std::abs(term) < 1e-16 * std::abs(q)) break;
      sign = -sign;
    }
    q = std::clamp(2.0 * q, 0.0, 1.0);
  }
  return {d, q};
}

}  // namespace qaction
