#include "qaction/path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "qaction/error.hpp"

namespace qaction {

int default_slice_count(double transition_time) {
  if (transition_time <= 4.0) return 400;
  return static_cast<int>(std::ceil(100.0 * transition_time));
}

namespace {

struct Sym2 {
  double a = 0.0;  // xx
  double b = 0.0;  // xy
  double d = 0.0;  // yy

  bool positive_definite() const noexcept { return a > 0.0 && a * d - b * b > 0.0; }
  Sym2 inverse() const noexcept {
    const double det = a * d - b * b;
    return {d / det, -b / det, a / det};
  }
  Point apply(Point v) const noexcept { return {a * v.x + b * v.y, b * v.x + d * v.y}; }
};

Point operator+(Point p, Point q) { return {p.x + q.x, p.y + q.y}; }
Point operator-(Point p, Point q) { return {p.x - q.x, p.y - q.y}; }
Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
double norm(Point p) { return std::hypot(p.x, p.y); }

// Gradient of the discrete action with respect to interior slices.
void action_gradient(const ActionSpec& action, double dt, const std::vector<Point>& x, std::vector<Point>& g) {
  const std::size_t n = x.size();
  g.assign(n, Point{});
  const double k = action.mass / dt;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const Point lap = 2.0 * x[i] - x[i - 1] - x[i + 1];
    g[i] = k * lap + dt * potential_gradient(action.potential, x[i]);
  }
}

// Block LDL^T of the (shifted) second variation. Off-diagonal blocks are
// -(m/dt) I, so only the diagonal pivots need storing.
class BlockTridiagonal {
 public:
  bool factor(const ActionSpec& action, double dt, const std::vector<Point>& x, double shift) {
    const std::size_t n = x.size();
    inv_pivots_.assign(n, Sym2{});
    c_ = -action.mass / dt;
    const double diag = 2.0 * action.mass / dt + shift;
    Sym2 prev_inv{};
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const Hessian2 h = potential_hessian(action.potential, x[i]);
      Sym2 s{diag + dt * h.xx, dt * h.xy, diag + dt * (action.dim() == 1 ? 0.0 : h.yy)};
      if (i > 1) {
        s.a -= c_ * c_ * prev_inv.a;
        s.b -= c_ * c_ * prev_inv.b;
        s.d -= c_ * c_ * prev_inv.d;
      }
      if (!s.positive_definite()) return false;
      prev_inv = s.inverse();
      inv_pivots_[i] = prev_inv;
    }
    return true;
  }

  // Solves H d = g for interior slices; endpoints of d are zero.
  std::vector<Point> solve(const std::vector<Point>& g) const {
    const std::size_t n = g.size();
    std::vector<Point> z(n, Point{});
    for (std::size_t i = 1; i + 1 < n; ++i) {
      z[i] = g[i];
      if (i > 1) z[i] = z[i] - c_ * inv_pivots_[i - 1].apply(z[i - 1]);
    }
    std::vector<Point> d(n, Point{});
    for (std::size_t i = n - 2; i >= 1; --i) {
      Point rhs = z[i];
      if (i + 2 < n) rhs = rhs - c_ * d[i + 1];
      d[i] = inv_pivots_[i].apply(rhs);
    }
    return d;
  }

 private:
  std::vector<Sym2> inv_pivots_;
  double c_ = 0.0;
};

double max_gradient_norm(const ActionSpec& action, const std::vector<Point>& x) {
  double m = 0.0;
  for (const auto& p : x) m = std::max(m, norm(potential_gradient(action.potential, p)));
  return m;
}

double max_coordinate(const std::vector<Point>& x) {
  double m = 0.0;
  for (const auto& p : x) m = std::max({m, std::abs(p.x), std::abs(p.y)});
  return m;
}

struct Candidate {
  std::vector<Point> slices;
  int iterations = 0;
  double residual = 0.0;
  double action = 0.0;
  bool converged = false;
  bool positive_definite = false;
};

Candidate newton_minimize(const ActionSpec& action, double T, std::vector<Point> x, const PathSettings& settings) {
  const int n_intervals = static_cast<int>(x.size()) - 1;
  const double dt = T / n_intervals;
  const double eps = std::numeric_limits<double>::epsilon();
  std::vector<Point> g;
  std::vector<Point> trial(x.size());
  BlockTridiagonal system;
  const double base_shift = 1e-8 * 2.0 * action.mass / dt;

  Candidate out;
  double s_current = euclidean_action(action, T, x);
  for (int it = 0; it <= settings.max_iterations; ++it) {
    action_gradient(action, dt, x, g);
    double residual = 0.0;
    for (const auto& gi : g) residual = std::max(residual, norm(gi) / dt);
    const double scale = std::max(1.0, max_gradient_norm(action, x));
    // Slices are stored in double: the second difference cannot resolve
    // better than a few ulps of the coordinates times m/dt^2.
    const double floor = 8.0 * eps * action.mass / (dt * dt) * std::max(1.0, max_coordinate(x));
    out.iterations = it;
    out.residual = residual;
    if (residual <= std::max(settings.residual_tolerance * scale, floor)) {
      out.converged = true;
      break;
    }
    if (it == settings.max_iterations) break;

    double shift = 0.0;
    while (!system.factor(action, dt, x, shift)) {
      shift = shift == 0.0 ? base_shift : shift * 10.0;
      if (!std::isfinite(shift)) return out;
    }
    const auto step = system.solve(g);

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - alpha * step[i];
      const double s_trial = euclidean_action(action, T, trial);
      if (s_trial <= s_current + 16.0 * eps * std::max(1.0, std::abs(s_current))) {
        x.swap(trial);
        s_current = s_trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
  }
  out.action = euclidean_action(action, T, x);
  out.positive_definite = out.converged && system.factor(action, dt, x, 0.0);
  out.slices = std::move(x);
  return out;
}

std::vector<Point> straight_line(Point a, Point b, int n) {
  std::vector<Point> x(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    x[static_cast<std::size_t>(k)] = a + s * (b - a);
  }
  return x;
}

std::vector<Point> bumped(const std::vector<Point>& base, Point direction) {
  auto x = base;
  const int n = static_cast<int>(x.size()) - 1;
  for (int k = 1; k < n; ++k) {
    const double w = std::sin(std::numbers::pi * k / n);
    x[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] + w * direction;
  }
  return x;
}

bool has_double_well(const ActionSpec& action) {
  return std::visit([](const auto& p) { return p.v2 < 0.0; }, action.potential);
}

double bump_amplitude(const ActionSpec& action) {
  return std::visit(
      [](const auto& p) {
        if (p.v2 < 0.0 && p.v4 > 0.0) return std::max(1.0, std::sqrt(-p.v2 / (2.0 * p.v4)));
        return 1.0;
      },
      action.potential);
}

}  // namespace

TrajectoryBV solve_euclidean_path(const ActionSpec& action, Point x_in, Point x_fi, double transition_time,
                                  const PathSettings& settings, const std::vector<Point>* initial_guess) {
  validate(action);
  if (!(transition_time > 0.0)) fail(ErrorCode::NonPositiveTime, "transition time must be positive");
  const int n = settings.slices > 0 ? settings.slices : default_slice_count(transition_time);
  if (n < 50) fail(ErrorCode::InvalidArgument, "at least 50 slices are required");
  if (action.dim() == 1) {
    x_in.y = 0.0;
    x_fi.y = 0.0;
  }

  const auto line = straight_line(x_in, x_fi, n);
  std::vector<Candidate> candidates;
  if (initial_guess != nullptr && initial_guess->size() == line.size()) {
    auto guess = *initial_guess;
    guess.front() = x_in;
    guess.back() = x_fi;
    candidates.push_back(newton_minimize(action, transition_time, std::move(guess), settings));
  }
  candidates.push_back(newton_minimize(action, transition_time, line, settings));

  const bool need_more =
      settings.multistart && (has_double_well(action) || !candidates.back().positive_definite);
  if (need_more) {
    const double a = bump_amplitude(action);
    std::vector<Point> directions{{a, 0.0}, {-a, 0.0}};
    if (action.dim() == 2) {
      directions.push_back({0.0, a});
      directions.push_back({0.0, -a});
    }
    for (const auto& dir : directions) {
      candidates.push_back(newton_minimize(action, transition_time, bumped(line, dir), settings));
    }
  }

  const Candidate* best = nullptr;
  bool any_converged = false;
  for (const auto& c : candidates) {
    any_converged = any_converged || c.converged;
    if (!c.positive_definite) continue;
    if (best == nullptr || c.action < best->action) best = &c;
  }
  if (best == nullptr) {
    std::ostringstream os;
    os << "no positive-definite minimum between (" << x_in.x << "," << x_in.y << ") and (" << x_fi.x << ","
       << x_fi.y << ") at T=" << transition_time;
    fail(any_converged ? ErrorCode::ConjugatePoint : ErrorCode::NoConvergence, os.str());
  }

  TrajectoryBV out;
  out.action = action;
  out.duration = transition_time;
  out.slices = best->slices;
  out.iterations = best->iterations;
  out.residual = best->residual;
  return out;
}

double euclidean_action(const ActionSpec& action, double transition_time, const std::vector<Point>& slices) {
  const std::size_t n = slices.size();
  if (n < 2) fail(ErrorCode::InvalidArgument, "a trajectory needs at least two slices");
  const double dt = transition_time / static_cast<double>(n - 1);
  double kinetic = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Point d = slices[i + 1] - slices[i];
    kinetic += d.x * d.x + d.y * d.y;
  }
  double potential = 0.5 * (evaluate_potential(action.potential, slices.front()) +
                            evaluate_potential(action.potential, slices.back()));
  for (std::size_t i = 1; i + 1 < n; ++i) potential += evaluate_potential(action.potential, slices[i]);
  return 0.5 * action.mass * kinetic / dt + dt * potential;
}

double euclidean_action(const TrajectoryBV& trajectory) {
  return euclidean_action(trajectory.action, trajectory.duration, trajectory.slices);
}

double euler_lagrange_residual(const ActionSpec& action, double transition_time, const std::vector<Point>& slices) {
  const double dt = transition_time / static_cast<double>(slices.size() - 1);
  std::vector<Point> g;
  action_gradient(action, dt, slices, g);
  double r = 0.0;
  for (const auto& gi : g) r = std::max(r, norm(gi) / dt);
  return r;
}

bool hessian_positive_definite(const ActionSpec& action, double transition_time, const std::vector<Point>& slices) {
  BlockTridiagonal system;
  return system.factor(action, transition_time / static_cast<double>(slices.size() - 1), slices, 0.0);
}

double path_energy_residual(const TrajectoryBV& trajectory) {
  const auto& x = trajectory.slices;
  const double dt = trajectory.time_step();
  const double m = trajectory.action.mass;
  std::vector<double> energies;
  energies.reserve(x.size());
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const Point v = (0.5 / dt) * (x[i + 1] - x[i - 1]);
    energies.push_back(0.5 * m * (v.x * v.x + v.y * v.y) - evaluate_potential(trajectory.action.potential, x[i]));
  }
  if (energies.empty()) return 0.0;
  double mean = 0.0;
  for (double e : energies) mean += e;
  mean /= static_cast<double>(energies.size());
  double worst = 0.0;
  for (double e : energies) worst = std::max(worst, std::abs(e - mean));
  return worst / std::max(1.0, std::abs(mean));
}

ActionSensitivity action_sensitivity(const TrajectoryBV& trajectory) {
  const auto& x = trajectory.slices;
  const double dt = trajectory.time_step();
  const std::size_t n = x.size();
  const bool two_d = trajectory.action.dim() == 2;

  double kinetic = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Point d = x[i + 1] - x[i];
    kinetic += d.x * d.x + d.y * d.y;
  }

  std::vector<double> sums(two_d ? 4 : 3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    const double x2 = x[i].x * x[i].x;
    const double y2 = x[i].y * x[i].y;
    sums[0] += w;
    sums[1] += w * (x2 + y2);
    if (two_d) {
      sums[2] += w * x2 * y2;
      sums[3] += w * (x2 * x2 + y2 * y2);
    } else {
      sums[2] += w * x2 * x2;
    }
  }
  for (double& s : sums) s *= dt;
  return {0.5 * kinetic / dt, std::move(sums)};
}

}  // namespace qaction
