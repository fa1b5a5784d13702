#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "qaction/model.hpp"

namespace qaction {

/// Uniform periodic lattice, symmetric about the origin.
///
/// Nodes sit at -L + j*h for j = 0..n-1 with h = 2L/n, so the origin is the
/// node j = n/2 and the point +L is identified with -L by periodicity.
struct SpatialGrid {
  int dim = 1;
  double half_extent = 9.6;
  int points_per_axis = 384;

  double spacing() const noexcept { return 2.0 * half_extent / points_per_axis; }
  double coordinate(int j) const noexcept { return -half_extent + j * spacing(); }
  std::size_t size() const noexcept;

  /// Index along one axis of the node at coordinate `x`; throws OffGrid if
  /// `x` is not within 1e-9 h of a node.
  int axis_index(double x) const;
  std::size_t node_index(Point p) const;
  Point node(std::size_t index) const;
  double cell_volume() const noexcept;

  friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;
};

/// Throws InvalidArgument unless n >= 16, n even, L > 0 and dim in {1, 2}.
void validate(const SpatialGrid& grid);

/// 1-D: L = 9.6, n = 384 (h = 0.05). 2-D: L = 5, n = 160 per axis (h = 1/16).
SpatialGrid default_grid(int dim);

struct EvolutionSettings {
  double dt = 1e-3;
  /// Compare against a dt/2 run at the source node and raise GridTooCoarse
  /// when the relative difference exceeds `richardson_tolerance`.
  bool richardson_check = true;
  double richardson_tolerance = 1e-5;
  /// Evolve in long double. The FFT round-off floor in double precision
  /// sits around 1e-16 of the kernel peak, which swamps amplitudes near the
  /// table's underflow floor.
  bool extended_precision = true;
  Conventions conventions{};
};

/// Second-order split-operator propagator exp(-t H / hbar) on a periodic
/// lattice: half potential step, spectral kinetic step, half potential step.
///
/// Holds FFT plans and scratch buffers, so an instance must not be shared
/// between threads.
class ImaginaryTimeEvolver {
 public:
  ImaginaryTimeEvolver(const ActionSpec& action, const SpatialGrid& grid, double dt,
                       bool extended_precision = true, const Conventions& conv = {});
  ~ImaginaryTimeEvolver();
  ImaginaryTimeEvolver(ImaginaryTimeEvolver&&) noexcept;
  ImaginaryTimeEvolver& operator=(ImaginaryTimeEvolver&&) noexcept;

  const SpatialGrid& grid() const noexcept;
  double dt() const noexcept;

  /// Applies `steps` Strang steps in place. `values.size()` must equal grid().size().
  void advance(std::span<double> values, std::int64_t steps);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Number of steps of size dt covering T; throws unless dt divides T to one
/// part in 1e9.
std::int64_t step_count(double transition_time, double dt);

/// Discrete delta of weight 1/h^dim at the node `source`.
std::vector<double> discrete_delta(const SpatialGrid& grid, Point source);

/// G(x, T; x_in, 0) at every node.
struct KernelSlice {
  SpatialGrid grid;
  Point source;
  double duration = 0.0;
  std::vector<double> values;

  double at(Point x) const { return values.at(grid.node_index(x)); }
};

KernelSlice evolve_kernel(const ActionSpec& action, const SpatialGrid& grid, double transition_time,
                          Point source, const EvolutionSettings& settings = {});

/// Single kernel element; throws Underflow below 1e-300.
double amplitude(const ActionSpec& action, const SpatialGrid& grid, double transition_time,
                 Point x_in, Point x_fi, const EvolutionSettings& settings = {});

struct AmplitudeEntry {
  Point x_in;
  Point x_fi;
  double g = 0.0;
};

struct TableMetadata {
  SpatialGrid grid;
  double dt = 0.0;
  double underflow_floor = 1e-12;
  std::size_t dropped_count = 0;
  std::size_t kernel_evolutions = 0;
};

/// Euclidean amplitudes over all ordered boundary pairs at one duration.
struct AmplitudeTable {
  double duration = 0.0;
  int dim = 1;
  std::vector<AmplitudeEntry> pairs;
  TableMetadata metadata;
};

struct TableOptions {
  double underflow_floor = 1e-12;
  /// Evolve only one source per orbit of the potential's symmetry group
  /// (parity in 1-D; parity per axis and exchange in 2-D) and map the rest.
  bool exploit_symmetry = true;
};

/// One kernel evolution per distinct (canonical) source, reused across all
/// targets; entries below the underflow floor are dropped and counted.
/// Throws EmptyTable if nothing survives.
AmplitudeTable amplitude_table(const ActionSpec& action, const SpatialGrid& grid,
                               double transition_time, std::span<const Point> boundary_set,
                               const EvolutionSettings& settings = {},
                               const TableOptions& options = {});

/// 21 points from -3 to 3 in steps of 0.3 (1-D), or the 5x5 lattice
/// {-2,...,2}^2 (2-D).
std::vector<Point> default_boundary_set(int dim);

struct GroundState {
  double energy = 0.0;
  std::vector<double> wavefunction;
  SpatialGrid grid;
};

struct GroundStateSettings {
  double projection_time = 20.0;
  double window = 1.0;
  double tolerance = 1e-7;
};

/// Feynman-Kac projection: E0 from the decay rate of the kernel norm over
/// two consecutive windows after `projection_time`; throws NotConverged if
/// the windows disagree by more than the tolerance.
GroundState ground_state_projection(const ActionSpec& action, const SpatialGrid& grid,
                                    const EvolutionSettings& settings = {},
                                    const GroundStateSettings& gs = {});

}  // namespace qaction
