#include "qaction/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>

#include "qaction/error.hpp"

namespace qaction {

std::vector<double> free_parameters(const ActionSpec& action) {
  if (action.dim() == 1) {
    const auto& p = action.potential_1d();
    return {action.mass, p.v2, p.v4};
  }
  const auto& p = action.potential_2d();
  return {action.mass, p.v2, p.v22, p.v4};
}

ActionSpec with_free_parameters(const ActionSpec& ansatz, std::span<const double> params) {
  ActionSpec out = ansatz;
  out.mass = params[0];
  if (ansatz.dim() == 1) {
    auto p = ansatz.potential_1d();
    p.v2 = params[1];
    p.v4 = params[2];
    out.potential = p;
  } else {
    auto p = ansatz.potential_2d();
    p.v2 = params[1];
    p.v22 = params[2];
    p.v4 = params[3];
    out.potential = p;
  }
  return out;
}

std::vector<std::string> free_parameter_names(int dim) {
  if (dim == 1) return {"m", "v2", "v4"};
  return {"m", "v2", "v22", "v4"};
}

namespace {

struct FitPoint {
  Point x_in;
  Point x_fi;
  double log_g = 0.0;
  double weight = 0.0;
};

using PairKey = std::array<std::int64_t, 4>;

std::int64_t quantize(double x) { return static_cast<std::int64_t>(std::llround(x * 1e6)); }

PairKey raw_key(Point a, Point b) { return {quantize(a.x), quantize(a.y), quantize(b.x), quantize(b.y)}; }

// Smallest key over time reversal and the potential's symmetry group.
PairKey canonical_key(Point a, Point b, int dim) {
  PairKey best = raw_key(a, b);
  const int swaps = dim == 2 ? 2 : 1;
  const std::array<double, 2> signs{1.0, -1.0};
  for (double sx : signs) {
    for (double sy : (dim == 2 ? signs : std::array<double, 2>{1.0, 1.0})) {
      for (int sw = 0; sw < swaps; ++sw) {
        auto g = [&](Point p) {
          Point q{sx * p.x, sy * p.y};
          if (sw == 1) std::swap(q.x, q.y);
          return q;
        };
        best = std::min({best, raw_key(g(a), g(b)), raw_key(g(b), g(a))});
      }
    }
  }
  return best;
}

double base_weight(double log_g, const FitConfig& config) {
  if (config.downweight_large_log && std::abs(log_g) > config.large_log_threshold) return config.large_log_weight;
  return 1.0;
}

std::vector<FitPoint> prepare_points(const AmplitudeTable& table, const FitConfig& config) {
  std::vector<FitPoint> points;
  if (!config.deduplicate_symmetric_pairs) {
    for (const auto& e : table.pairs) {
      const double lg = std::log(e.g);
      points.push_back({e.x_in, e.x_fi, lg, base_weight(lg, config)});
    }
    return points;
  }
  struct Group {
    FitPoint representative;
    double log_sum = 0.0;
    double weight_sum = 0.0;
    int count = 0;
  };
  std::map<PairKey, Group> groups;
  std::vector<PairKey> order;
  for (const auto& e : table.pairs) {
    const auto key = canonical_key(e.x_in, e.x_fi, table.dim);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) {
      it->second.representative = {e.x_in, e.x_fi, 0.0, 0.0};
      order.push_back(key);
    }
    const double lg = std::log(e.g);
    it->second.log_sum += lg;
    it->second.weight_sum += base_weight(lg, config);
    ++it->second.count;
  }
  for (const auto& key : order) {
    auto& g = groups.at(key);
    FitPoint p = g.representative;
    p.log_g = g.log_sum / g.count;
    p.weight = g.weight_sum;
    points.push_back(p);
  }
  return points;
}

struct Evaluation {
  std::vector<double> c;  // ln G + S / hbar
  Eigen::MatrixXd jacobian;
  std::vector<std::vector<Point>> paths;
};

// Throws (path errors) if any boundary pair fails at these parameters.
Evaluation evaluate(const std::vector<FitPoint>& points, const ActionSpec& action, double transition_time,
                    const FitConfig& config, const std::vector<std::vector<Point>>* warm) {
  const double hbar = config.conventions.hbar;
  const bool two_d = action.dim() == 2;
  const auto k = static_cast<Eigen::Index>(two_d ? 4 : 3);
  Evaluation ev;
  ev.c.resize(points.size());
  ev.jacobian.resize(static_cast<Eigen::Index>(points.size()), k);
  ev.paths.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::vector<Point>* guess = (warm != nullptr && i < warm->size()) ? &(*warm)[i] : nullptr;
    auto path = solve_euclidean_path(action, points[i].x_in, points[i].x_fi, transition_time, config.path, guess);
    const double s = euclidean_action(path);
    const auto sens = action_sensitivity(path);
    const auto row = static_cast<Eigen::Index>(i);
    ev.c[i] = points[i].log_g + s / hbar;
    ev.jacobian(row, 0) = sens.mass / hbar;
    // Sensitivities are ordered (v0, v2, [v22,] v4); v0 is not free.
    for (Eigen::Index j = 1; j < k; ++j) {
      ev.jacobian(row, j) = sens.potential[static_cast<std::size_t>(j)] / hbar;
    }
    ev.paths[i] = std::move(path.slices);
  }
  return ev;
}

struct Profiled {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  double log_z = 0.0;
  double cost = 0.0;
};

Profiled profile(const Evaluation& ev, const Eigen::VectorXd& w) {
  const auto n = static_cast<Eigen::Index>(ev.c.size());
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(ev.c.data(), n);
  const double wsum = w.sum();
  Profiled p;
  p.log_z = w.dot(c) / wsum;
  p.r = c.array() - p.log_z;
  const Eigen::RowVectorXd jmean = (w.transpose() * ev.jacobian) / wsum;
  p.j = ev.jacobian.rowwise() - jmean;
  p.cost = (w.array() * p.r.array().square()).sum();
  return p;
}

bool feasible(std::span<const double> theta, int dim, double min_mass) {
  if (!(theta[0] >= min_mass)) return false;
  for (double t : theta) {
    if (!std::isfinite(t)) return false;
  }
  const double v2 = theta[1];
  const double v4 = dim == 1 ? theta[2] : theta[3];
  if (v4 < 0.0) return false;
  if (dim == 2 && theta[2] < 0.0) return false;
  return !(v4 == 0.0 && v2 < 0.0);
}

// Indices with lower bounds: mass, v4 (and v22 in 2-D).
std::vector<std::pair<int, double>> lower_bounds(int dim, double min_mass) {
  if (dim == 1) return {{0, min_mass}, {2, 0.0}};
  return {{0, min_mass}, {2, 0.0}, {3, 0.0}};
}

}  // namespace

double fit_objective(const AmplitudeTable& table, const ActionSpec& action, const FitConfig& config) {
  const auto points = prepare_points(table, config);
  const auto ev = evaluate(points, action, table.duration, config, nullptr);
  Eigen::VectorXd w(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) w[static_cast<Eigen::Index>(i)] = points[i].weight;
  return profile(ev, w).cost;
}

QuantumActionFit fit_quantum_action(const AmplitudeTable& table, const ActionSpec& ansatz, const FitConfig& config) {
  validate(ansatz);
  if (ansatz.dim() != table.dim) fail(ErrorCode::InvalidArgument, "ansatz and table dimensions differ");
  const int dim = ansatz.dim();
  const std::size_t n_free = dim == 1 ? 3 : 4;
  if (table.pairs.size() < n_free + 2) {
    std::ostringstream os;
    os << "table has " << table.pairs.size() << " entries, need at least " << n_free + 2;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  if (config.offset == OffsetConvention::GroundStateAnchor && !config.ground_state_energy) {
    fail(ErrorCode::InvalidArgument, "ground-state anchor requested without a ground-state energy");
  }
  const double T = table.duration;
  const auto points = prepare_points(table, config);
  const auto np = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd w(np);
  for (Eigen::Index i = 0; i < np; ++i) w[i] = points[static_cast<std::size_t>(i)].weight;

  ActionSpec base = ansatz;
  base.kind = ActionKind::Quantum;
  std::visit([](auto& p) { p.v0 = 0.0; }, base.potential);

  std::vector<double> theta = free_parameters(base);
  for (auto [idx, lo] : lower_bounds(dim, config.min_mass)) {
    theta[static_cast<std::size_t>(idx)] = std::max(theta[static_cast<std::size_t>(idx)], lo);
  }
  if (!feasible(theta, dim, config.min_mass)) fail(ErrorCode::InvalidArgument, "ansatz violates parameter bounds");

  Evaluation current;
  try {
    current = evaluate(points, with_free_parameters(base, theta), T, config, nullptr);
  } catch (const Error& e) {
    fail(ErrorCode::PathFailure, std::string("initial parameters: ") + e.what());
  }
  Profiled prof = profile(current, w);

  const auto k = static_cast<Eigen::Index>(n_free);
  double mu = 1e-3;
  int iteration = 0;
  double grad_norm = 0.0;
  bool converged = false;
  int consecutive_path_failures = 0;
  const auto bounds = lower_bounds(dim, config.min_mass);

  for (; iteration < config.max_iterations; ++iteration) {
    const Eigen::MatrixXd jw = prof.j.transpose() * w.asDiagonal();
    const Eigen::MatrixXd a = jw * prof.j;
    Eigen::VectorXd g = jw * prof.r;

    // Projected gradient: a parameter sitting on its lower bound with the
    // descent direction pointing out of the feasible set is inactive.
    Eigen::VectorXd g_proj = g;
    for (auto [idx, lo] : bounds) {
      if (theta[static_cast<std::size_t>(idx)] <= lo && g[idx] > 0.0) g_proj[idx] = 0.0;
    }
    grad_norm = g_proj.lpNorm<Eigen::Infinity>();
    if (grad_norm <= config.gradient_tolerance) {
      converged = true;
      break;
    }

    // Active set: bound parameters pushed outward are frozen for this step.
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < k; ++i) {
      bool frozen = false;
      for (auto [idx, lo] : bounds) {
        if (idx == i && theta[static_cast<std::size_t>(idx)] <= lo && g[idx] > 0.0) frozen = true;
      }
      if (!frozen) active.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(active.size());

    bool accepted = false;
    bool tiny_step = false;
    while (mu < 1e12) {
      Eigen::MatrixXd damped(na, na);
      Eigen::VectorXd rhs(na);
      for (Eigen::Index r = 0; r < na; ++r) {
        rhs[r] = -g[active[static_cast<std::size_t>(r)]];
        for (Eigen::Index c = 0; c < na; ++c) {
          damped(r, c) = a(active[static_cast<std::size_t>(r)], active[static_cast<std::size_t>(c)]);
        }
        damped(r, r) += mu * std::max(damped(r, r), 1e-12);
      }
      const Eigen::VectorXd delta = damped.ldlt().solve(rhs);
      std::vector<double> trial(theta);
      for (Eigen::Index r = 0; r < na; ++r) trial[static_cast<std::size_t>(active[static_cast<std::size_t>(r)])] += delta[r];
      for (auto [idx, lo] : bounds) {
        trial[static_cast<std::size_t>(idx)] = std::max(trial[static_cast<std::size_t>(idx)], lo);
      }
      if (!feasible(trial, dim, config.min_mass)) {
        mu *= 10.0;
        continue;
      }
      Evaluation ev;
      try {
        ev = evaluate(points, with_free_parameters(base, trial), T, config, &current.paths);
        consecutive_path_failures = 0;
      } catch (const Error&) {
        // Rejected iterate (caustic or solver failure): damp and retry.
        if (++consecutive_path_failures > 40) {
          fail(ErrorCode::PathFailure, "boundary-value solves keep failing near the current iterate");
        }
        mu *= 10.0;
        continue;
      }
      Profiled p = profile(ev, w);
      if (p.cost < prof.cost) {
        double step_norm = 0.0;
        double theta_norm = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
          step_norm = std::max(step_norm, std::abs(trial[i] - theta[i]));
          theta_norm = std::max(theta_norm, std::abs(theta[i]));
        }
        tiny_step = step_norm <= config.step_tolerance * (theta_norm + config.step_tolerance);
        theta = trial;
        current = std::move(ev);
        prof = std::move(p);
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted || tiny_step) {
      // No further decrease is representable: a stationary point to
      // working precision.
      const Eigen::MatrixXd jw2 = prof.j.transpose() * w.asDiagonal();
      Eigen::VectorXd g2 = jw2 * prof.r;
      for (auto [idx, lo] : bounds) {
        if (theta[static_cast<std::size_t>(idx)] <= lo && g2[idx] > 0.0) g2[idx] = 0.0;
      }
      grad_norm = g2.lpNorm<Eigen::Infinity>();
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "fit did not converge in " << config.max_iterations << " iterations (gradient norm " << grad_norm << ")";
    fail(ErrorCode::NotConverged, os.str());
  }

  QuantumActionFit out;
  out.temperature = temperature_of_time(T, config.conventions);
  out.quantum_action = with_free_parameters(base, theta);
  out.log_z = prof.log_z;
  out.iterations = iteration;
  out.gradient_norm = grad_norm;
  if (config.offset == OffsetConvention::GroundStateAnchor) {
    const double floor = potential_minimum_value(out.quantum_action.potential);
    const double v0 = *config.ground_state_energy - floor;
    std::visit([v0](auto& p) { p.v0 = v0; }, out.quantum_action.potential);
    out.log_z += v0 * T / config.conventions.hbar;
  }

  // Residuals for every table row, including merged duplicates.
  std::map<PairKey, double> action_by_key;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto key = config.deduplicate_symmetric_pairs ? canonical_key(points[i].x_in, points[i].x_fi, dim)
                                                        : raw_key(points[i].x_in, points[i].x_fi);
    action_by_key[key] = current.c[i] - points[i].log_g;
  }
  double sum_sq = 0.0;
  double worst = 0.0;
  out.residuals.reserve(table.pairs.size());
  for (const auto& e : table.pairs) {
    const auto key = config.deduplicate_symmetric_pairs ? canonical_key(e.x_in, e.x_fi, dim) : raw_key(e.x_in, e.x_fi);
    const double r = std::log(e.g) + action_by_key.at(key) - prof.log_z;
    out.residuals.push_back(r);
    sum_sq += r * r;
    worst = std::max(worst, std::abs(r));
  }
  out.n_points = table.pairs.size();
  out.residual_rms = std::sqrt(sum_sq / static_cast<double>(out.n_points));
  out.residual_max = worst;
  return out;
}

ParameterFlow parameter_flow(const ActionSpec& classical, std::span<const double> times, const FitConfig& config) {
  validate(classical);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0)) fail(ErrorCode::NonPositiveTime, "flow times must be positive");
    if (i > 0 && !(times[i] > times[i - 1])) fail(ErrorCode::InvalidArgument, "flow times must be strictly increasing");
  }
  const int dim = classical.dim();
  const SpatialGrid grid = config.grid.value_or(default_grid(dim));
  const auto boundary = config.boundary_set.empty() ? default_boundary_set(dim) : config.boundary_set;

  FitConfig cfg = config;
  if (cfg.offset == OffsetConvention::GroundStateAnchor && !cfg.ground_state_energy) {
    cfg.ground_state_energy = ground_state_projection(classical, grid, cfg.evolution).energy;
  }

  ParameterFlow flow;
  flow.dim = dim;
  ActionSpec start = classical;
  start.kind = ActionKind::Quantum;
  for (double T : times) {
    FlowEntry entry;
    entry.transition_time = T;
    try {
      entry.table = amplitude_table(classical, grid, T, boundary, cfg.evolution, cfg.table);
      entry.fit = fit_quantum_action(*entry.table, start, cfg);
      start = entry.fit->quantum_action;
    } catch (const Error& e) {
      entry.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    flow.entries.push_back(std::move(entry));
  }
  return flow;
}

double flow_convergence(const ParameterFlow& flow, double tol) {
  std::vector<const FlowEntry*> ok;
  for (const auto& e : flow.entries) {
    if (e.fit) ok.push_back(&e);
  }
  if (ok.size() < 3) fail(ErrorCode::InvalidArgument, "flow convergence needs at least three successful entries");

  auto change = [](const FlowEntry& a, const FlowEntry& b) {
    const auto pa = free_parameters(a.fit->quantum_action);
    const auto pb = free_parameters(b.fit->quantum_action);
    double worst = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      worst = std::max(worst, std::abs(pb[i] - pa[i]) / std::max(std::abs(pa[i]), 1e-2));
    }
    return worst;
  };

  // Walk back from the end while successive changes stay below tol.
  std::size_t start = ok.size() - 1;
  while (start > 0 && change(*ok[start - 1], *ok[start]) < tol) --start;
  if (start == ok.size() - 1) {
    std::ostringstream os;
    os << "parameters still change by more than " << tol << " between the last two entries";
    fail(ErrorCode::NotConverged, os.str());
  }
  return ok[start]->transition_time;
}

}  // namespace qaction
