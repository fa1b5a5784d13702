#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qaction/model.hpp"
#include "qaction/path.hpp"
#include "qaction/propagator.hpp"

namespace qaction {

/// How the potential offset v0 is separated from ln Z, which it is
/// degenerate with at fixed T (v0 T shifts ln Z).
enum class OffsetConvention {
  /// v0 = 0; log_z then reports the identifiable combination ln Z - v0 T / hbar.
  Zero,
  /// v0 chosen so the minimum of the fitted potential equals the ground-state
  /// energy of the classical Hamiltonian (large-T Feynman-Kac anchor).
  GroundStateAnchor,
};

struct FitConfig {
  std::vector<Point> boundary_set;
  int max_iterations = 200;
  double gradient_tolerance = 1e-9;
  double step_tolerance = 1e-10;
  double min_mass = 1e-3;
  /// Optional down-weighting of pairs with |ln G| above a threshold.
  bool downweight_large_log = false;
  double large_log_threshold = 20.0;
  double large_log_weight = 0.1;
  /// Merge pairs related by time reversal and by the potential's symmetry
  /// group into one weighted entry.
  bool deduplicate_symmetric_pairs = true;
  OffsetConvention offset = OffsetConvention::Zero;
  /// Required for the GroundStateAnchor convention.
  std::optional<double> ground_state_energy;

  PathSettings path;
  // Used by parameter_flow to build the amplitude tables.
  std::optional<SpatialGrid> grid;
  EvolutionSettings evolution;
  TableOptions table;
  Conventions conventions;
};

/// Free parameters of the ansatz, in this order:
/// 1-D (m, v2, v4); 2-D (m, v2, v22, v4).
std::vector<double> free_parameters(const ActionSpec& action);
ActionSpec with_free_parameters(const ActionSpec& ansatz, std::span<const double> params);
std::vector<std::string> free_parameter_names(int dim);

struct QuantumActionFit {
  TemperaturePoint temperature;
  ActionSpec quantum_action;
  double log_z = 0.0;
  double residual_rms = 0.0;
  double residual_max = 0.0;
  std::size_t n_points = 0;
  int iterations = 0;
  double gradient_norm = 0.0;
  /// r_i = ln G_i + S_i / hbar - ln Z for every table entry, in table order.
  std::vector<double> residuals;
};

/// Global least-squares fit of ln G_i = ln Z - S_E[path_i] / hbar over the
/// table, with ln Z profiled out as the weighted mean at every step.
QuantumActionFit fit_quantum_action(const AmplitudeTable& table, const ActionSpec& ansatz,
                                    const FitConfig& config);

/// Weighted sum of squared profiled residuals of `action` against the table,
/// with the same weighting and deduplication as the fitter.
double fit_objective(const AmplitudeTable& table, const ActionSpec& action, const FitConfig& config);

struct FlowEntry {
  double transition_time = 0.0;
  /// Table the fit was made against; present whenever the table was built.
  std::optional<AmplitudeTable> table;
  std::optional<QuantumActionFit> fit;
  std::string error;
};

struct ParameterFlow {
  std::vector<FlowEntry> entries;
  int dim = 1;
};

/// Fits at each T in ascending order, warm-starting from the previous
/// successful fit. Failures are recorded per entry and the scan continues.
ParameterFlow parameter_flow(const ActionSpec& classical, std::span<const double> times, const FitConfig& config);

/// Smallest T after which every free parameter's successive relative change
/// stays below `tol`. Relative changes use max(|p|, 1e-2) as denominator.
/// Throws InvalidArgument for fewer than three successful entries and
/// NotConverged if no such T exists.
double flow_convergence(const ParameterFlow& flow, double tol);

}  // namespace qaction
