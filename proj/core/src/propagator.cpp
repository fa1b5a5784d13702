#include "qaction/propagator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "qaction/error.hpp"

namespace qaction {

// ---------------------------------------------------------------------------
// grid

std::size_t SpatialGrid::size() const noexcept {
  const auto n = static_cast<std::size_t>(points_per_axis);
  return dim == 1 ? n : n * n;
}

double SpatialGrid::cell_volume() const noexcept {
  const double h = spacing();
  return dim == 1 ? h : h * h;
}

int SpatialGrid::axis_index(double x) const {
  const double h = spacing();
  const double j = (x + half_extent) / h;
  const double jr = std::round(j);
  if (std::abs(j - jr) > 1e-9 || jr < 0.0 || jr >= points_per_axis) {
    std::ostringstream os;
    os << "coordinate " << x << " is not a node of the grid (L=" << half_extent
       << ", n=" << points_per_axis << ", h=" << h << ")";
    fail(ErrorCode::OffGrid, os.str());
  }
  return static_cast<int>(jr);
}

std::size_t SpatialGrid::node_index(Point p) const {
  const auto i = static_cast<std::size_t>(axis_index(p.x));
  if (dim == 1) return i;
  const auto j = static_cast<std::size_t>(axis_index(p.y));
  return i * static_cast<std::size_t>(points_per_axis) + j;
}

Point SpatialGrid::node(std::size_t index) const {
  if (dim == 1) return {coordinate(static_cast<int>(index)), 0.0};
  const auto n = static_cast<std::size_t>(points_per_axis);
  return {coordinate(static_cast<int>(index / n)), coordinate(static_cast<int>(index % n))};
}

void validate(const SpatialGrid& grid) {
  if (grid.dim != 1 && grid.dim != 2) fail(ErrorCode::InvalidArgument, "grid dim must be 1 or 2");
  if (grid.points_per_axis < 16 || grid.points_per_axis % 2 != 0) {
    fail(ErrorCode::InvalidArgument, "points_per_axis must be even and >= 16");
  }
  if (!(grid.half_extent > 0.0)) fail(ErrorCode::InvalidArgument, "half_extent must be positive");
}

SpatialGrid default_grid(int dim) {
  if (dim == 1) return {1, 9.6, 384};
  if (dim == 2) return {2, 5.0, 160};
  fail(ErrorCode::InvalidArgument, "dim must be 1 or 2");
}

// ---------------------------------------------------------------------------
// FFTW precision traits

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class Real>
struct Fftw;

template <>
struct Fftw<double> {
  using Complex = fftw_complex;
  using Plan = fftw_plan;
  static void* alloc(std::size_t bytes) { return fftw_malloc(bytes); }
  static void free(void* p) { fftw_free(p); }
  static Plan r2c(int dim, int n, double* in, Complex* out) {
    return dim == 1 ? fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE)
                    : fftw_plan_dft_r2c_2d(n, n, in, out, FFTW_ESTIMATE);
  }
  static Plan c2r(int dim, int n, Complex* in, double* out) {
    return dim == 1 ? fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE)
                    : fftw_plan_dft_c2r_2d(n, n, in, out, FFTW_ESTIMATE);
  }
  static void execute(Plan p) { fftw_execute(p); }
  static void destroy(Plan p) { fftw_destroy_plan(p); }
};

template <>
struct Fftw<long double> {
  using Complex = fftwl_complex;
  using Plan = fftwl_plan;
  static void* alloc(std::size_t bytes) { return fftwl_malloc(bytes); }
  static void free(void* p) { fftwl_free(p); }
  static Plan r2c(int dim, int n, long double* in, Complex* out) {
    return dim == 1 ? fftwl_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE)
                    : fftwl_plan_dft_r2c_2d(n, n, in, out, FFTW_ESTIMATE);
  }
  static Plan c2r(int dim, int n, Complex* in, long double* out) {
    return dim == 1 ? fftwl_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE)
                    : fftwl_plan_dft_c2r_2d(n, n, in, out, FFTW_ESTIMATE);
  }
  static void execute(Plan p) { fftwl_execute(p); }
  static void destroy(Plan p) { fftwl_destroy_plan(p); }
};

class SplitStepBase {
 public:
  virtual ~SplitStepBase() = default;
  virtual void advance(std::span<double> values, std::int64_t steps) = 0;
};

template <class Real>
class SplitStep final : public SplitStepBase {
  using F = Fftw<Real>;

 public:
  SplitStep(const ActionSpec& action, const SpatialGrid& grid, double dt, const Conventions& conv)
      : dim_(grid.dim), n_(grid.points_per_axis) {
    const std::size_t real_size = grid.size();
    const std::size_t half = static_cast<std::size_t>(n_ / 2 + 1);
    spectral_size_ = dim_ == 1 ? half : static_cast<std::size_t>(n_) * half;

    real_ = static_cast<Real*>(F::alloc(sizeof(Real) * real_size));
    spectral_ = static_cast<typename F::Complex*>(F::alloc(sizeof(typename F::Complex) * spectral_size_));
    {
      std::lock_guard lock(planner_mutex());
      forward_ = F::r2c(dim_, n_, real_, spectral_);
      backward_ = F::c2r(dim_, n_, spectral_, real_);
    }

    const Real hbar = conv.hbar;
    const Real step = dt;
    half_potential_.resize(real_size);
    full_potential_.resize(real_size);
    for (std::size_t i = 0; i < real_size; ++i) {
      const Real v = evaluate_potential(action.potential, grid.node(i));
      half_potential_[i] = std::exp(-Real(0.5) * step * v / hbar);
      full_potential_[i] = std::exp(-step * v / hbar);
    }

    // Kinetic factor exp(-dt hbar k^2 / 2m) with periodic wavenumbers, folded
    // together with the 1/N normalization of the unnormalized inverse FFT.
    const Real length = Real(2) * static_cast<Real>(grid.half_extent);
    const Real two_pi = Real(2) * std::numbers::pi_v<Real>;
    auto wavenumber = [&](int j) {
      const int signed_j = j <= n_ / 2 ? j : j - n_;
      return two_pi * static_cast<Real>(signed_j) / length;
    };
    const Real norm = Real(1) / static_cast<Real>(real_size);
    const Real mass = action.mass;
    kinetic_.resize(spectral_size_);
    if (dim_ == 1) {
      for (std::size_t j = 0; j < half; ++j) {
        const Real k = wavenumber(static_cast<int>(j));
        kinetic_[j] = norm * std::exp(-step * hbar * k * k / (Real(2) * mass));
      }
    } else {
      for (int i = 0; i < n_; ++i) {
        const Real kx = wavenumber(i);
        for (std::size_t j = 0; j < half; ++j) {
          const Real ky = wavenumber(static_cast<int>(j));
          kinetic_[static_cast<std::size_t>(i) * half + j] =
              norm * std::exp(-step * hbar * (kx * kx + ky * ky) / (Real(2) * mass));
        }
      }
    }
  }

  ~SplitStep() override {
    std::lock_guard lock(planner_mutex());
    F::destroy(forward_);
    F::destroy(backward_);
    F::free(real_);
    F::free(spectral_);
  }

  SplitStep(const SplitStep&) = delete;
  SplitStep& operator=(const SplitStep&) = delete;

  void advance(std::span<double> values, std::int64_t steps) override {
    if (steps <= 0) return;
    const std::size_t size = half_potential_.size();
    for (std::size_t i = 0; i < size; ++i) real_[i] = static_cast<Real>(values[i]) * half_potential_[i];
    for (std::int64_t s = 0; s < steps; ++s) {
      kinetic_step();
      const auto& factor = (s + 1 == steps) ? half_potential_ : full_potential_;
      for (std::size_t i = 0; i < size; ++i) real_[i] *= factor[i];
    }
    for (std::size_t i = 0; i < size; ++i) values[i] = static_cast<double>(real_[i]);
  }

 private:
  void kinetic_step() {
    F::execute(forward_);
    for (std::size_t j = 0; j < spectral_size_; ++j) {
      spectral_[j][0] *= kinetic_[j];
      spectral_[j][1] *= kinetic_[j];
    }
    F::execute(backward_);
  }

  int dim_;
  int n_;
  std::size_t spectral_size_ = 0;
  Real* real_ = nullptr;
  typename F::Complex* spectral_ = nullptr;
  typename F::Plan forward_{};
  typename F::Plan backward_{};
  std::vector<Real> half_potential_;
  std::vector<Real> full_potential_;
  std::vector<Real> kinetic_;
};

}  // namespace

struct ImaginaryTimeEvolver::Impl {
  SpatialGrid grid;
  double dt;
  std::unique_ptr<SplitStepBase> stepper;
};

ImaginaryTimeEvolver::ImaginaryTimeEvolver(const ActionSpec& action, const SpatialGrid& grid, double dt,
                                           bool extended_precision, const Conventions& conv) {
  validate(action);
  validate(grid);
  if (action.dim() != grid.dim) fail(ErrorCode::InvalidArgument, "action and grid dimensions differ");
  if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "dt must be positive");
  impl_ = std::make_unique<Impl>();
  impl_->grid = grid;
  impl_->dt = dt;
  if (extended_precision) {
    impl_->stepper = std::make_unique<SplitStep<long double>>(action, grid, dt, conv);
  } else {
    impl_->stepper = std::make_unique<SplitStep<double>>(action, grid, dt, conv);
  }
}

ImaginaryTimeEvolver::~ImaginaryTimeEvolver() = default;
ImaginaryTimeEvolver::ImaginaryTimeEvolver(ImaginaryTimeEvolver&&) noexcept = default;
ImaginaryTimeEvolver& ImaginaryTimeEvolver::operator=(ImaginaryTimeEvolver&&) noexcept = default;

const SpatialGrid& ImaginaryTimeEvolver::grid() const noexcept { return impl_->grid; }
double ImaginaryTimeEvolver::dt() const noexcept { return impl_->dt; }

void ImaginaryTimeEvolver::advance(std::span<double> values, std::int64_t steps) {
  if (values.size() != impl_->grid.size()) fail(ErrorCode::InvalidArgument, "state size does not match grid");
  impl_->stepper->advance(values, steps);
}

// ---------------------------------------------------------------------------
// kernels

std::int64_t step_count(double transition_time, double dt) {
  if (!(transition_time > 0.0)) fail(ErrorCode::NonPositiveTime, "transition time must be positive");
  if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "dt must be positive");
  const double ratio = transition_time / dt;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(steps * dt - transition_time) > 1e-9 * transition_time) {
    std::ostringstream os;
    os << "dt=" << dt << " does not divide T=" << transition_time;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  return static_cast<std::int64_t>(steps);
}

std::vector<double> discrete_delta(const SpatialGrid& grid, Point source) {
  std::vector<double> values(grid.size(), 0.0);
  values[grid.node_index(source)] = 1.0 / grid.cell_volume();
  return values;
}

namespace {

std::vector<double> evolve_delta(const ActionSpec& action, const SpatialGrid& grid, double transition_time,
                                 Point source, double dt, const EvolutionSettings& settings) {
  const auto steps = step_count(transition_time, dt);
  ImaginaryTimeEvolver evolver(action, grid, dt, settings.extended_precision, settings.conventions);
  auto values = discrete_delta(grid, source);
  evolver.advance(values, steps);
  return values;
}

void check_richardson(const ActionSpec& action, const SpatialGrid& grid, double transition_time, Point source,
                      const std::vector<double>& coarse, const EvolutionSettings& settings) {
  const auto fine = evolve_delta(action, grid, transition_time, source, 0.5 * settings.dt, settings);
  const std::size_t probe = grid.node_index(source);
  const double rel = std::abs(coarse[probe] - fine[probe]) / std::abs(fine[probe]);
  if (!(rel <= settings.richardson_tolerance)) {
    std::ostringstream os;
    os << "time-step error estimate " << rel << " exceeds tolerance " << settings.richardson_tolerance
       << " (dt=" << settings.dt << ", T=" << transition_time << ")";
    fail(ErrorCode::GridTooCoarse, os.str());
  }
}

void check_positive(const std::vector<double>& values) {
  const double lowest = *std::min_element(values.begin(), values.end());
  if (lowest < -1e-12) {
    std::ostringstream os;
    os << "kernel value " << lowest << " below -1e-12";
    fail(ErrorCode::NegativeKernel, os.str());
  }
}

}  // namespace

KernelSlice evolve_kernel(const ActionSpec& action, const SpatialGrid& grid, double transition_time,
                          Point source, const EvolutionSettings& settings) {
  grid.node_index(source);
  auto values = evolve_delta(action, grid, transition_time, source, settings.dt, settings);
  if (settings.richardson_check) check_richardson(action, grid, transition_time, source, values, settings);
  check_positive(values);
  return {grid, source, transition_time, std::move(values)};
}

double amplitude(const ActionSpec& action, const SpatialGrid& grid, double transition_time, Point x_in,
                 Point x_fi, const EvolutionSettings& settings) {
  grid.node_index(x_fi);
  const auto slice = evolve_kernel(action, grid, transition_time, x_in, settings);
  const double g = slice.at(x_fi);
  if (!(g >= 1e-300)) {
    std::ostringstream os;
    os << "amplitude " << g << " underflows";
    fail(ErrorCode::Underflow, os.str());
  }
  return g;
}

namespace {

// Symmetry element mapping a source onto its canonical representative.
struct SymmetryMap {
  double sx = 1.0;
  double sy = 1.0;
  bool swap = false;

  Point apply(Point p) const {
    Point q{sx * p.x, sy * p.y};
    if (swap) std::swap(q.x, q.y);
    return q;
  }
};

SymmetryMap canonicalize(Point p, int dim) {
  SymmetryMap g;
  g.sx = p.x < 0.0 ? -1.0 : 1.0;
  if (dim == 2) {
    g.sy = p.y < 0.0 ? -1.0 : 1.0;
    g.swap = std::abs(p.y) > std::abs(p.x);
  }
  return g;
}

}  // namespace

AmplitudeTable amplitude_table(const ActionSpec& action, const SpatialGrid& grid, double transition_time,
                               std::span<const Point> boundary_set, const EvolutionSettings& settings,
                               const TableOptions& options) {
  if (boundary_set.empty()) fail(ErrorCode::InvalidArgument, "boundary set is empty");
  validate(grid);
  for (const auto& p : boundary_set) grid.node_index(p);

  AmplitudeTable table;
  table.duration = transition_time;
  table.dim = grid.dim;
  table.metadata.grid = grid;
  table.metadata.dt = settings.dt;
  table.metadata.underflow_floor = options.underflow_floor;

  // Kernels keyed by source node.
  std::map<std::size_t, KernelSlice> kernels;
  bool checked = false;
  auto kernel_for = [&](Point source) -> const KernelSlice& {
    const auto key = grid.node_index(source);
    auto it = kernels.find(key);
    if (it != kernels.end()) return it->second;
    EvolutionSettings s = settings;
    // The time-step check is a property of (action, grid, dt, T); run it once.
    s.richardson_check = settings.richardson_check && !checked;
    checked = true;
    ++table.metadata.kernel_evolutions;
    return kernels.emplace(key, evolve_kernel(action, grid, transition_time, source, s)).first->second;
  };

  for (const auto& a : boundary_set) {
    const SymmetryMap g = options.exploit_symmetry ? canonicalize(a, grid.dim) : SymmetryMap{};
    const auto& slice = kernel_for(g.apply(a));
    for (const auto& b : boundary_set) {
      const double value = slice.at(g.apply(b));
      if (value < options.underflow_floor) {
        ++table.metadata.dropped_count;
        continue;
      }
      table.pairs.push_back({a, b, value});
    }
  }
  if (table.pairs.empty()) fail(ErrorCode::EmptyTable, "all amplitudes fell below the underflow floor");
  return table;
}

std::vector<Point> default_boundary_set(int dim) {
  std::vector<Point> set;
  if (dim == 1) {
    for (int i = -10; i <= 10; ++i) set.push_back({0.3 * i, 0.0});
  } else if (dim == 2) {
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j) set.push_back({double(i), double(j)});
  } else {
    fail(ErrorCode::InvalidArgument, "dim must be 1 or 2");
  }
  return set;
}

// ---------------------------------------------------------------------------
// ground state

namespace {

double l2_norm(const std::vector<double>& v, double cell) {
  long double s = 0.0L;
  for (double x : v) s += static_cast<long double>(x) * x;
  return std::sqrt(static_cast<double>(s) * cell);
}

}  // namespace

GroundState ground_state_projection(const ActionSpec& action, const SpatialGrid& grid,
                                    const EvolutionSettings& settings, const GroundStateSettings& gs) {
  const auto warmup = step_count(gs.projection_time, settings.dt);
  const auto window = step_count(gs.window, settings.dt);
  ImaginaryTimeEvolver evolver(action, grid, settings.dt, settings.extended_precision, settings.conventions);
  const double cell = grid.cell_volume();

  Point origin{};
  auto psi = discrete_delta(grid, origin);

  // Renormalize every unit of time so nothing under- or overflows.
  const auto chunk = std::max<std::int64_t>(1, step_count(1.0, settings.dt));
  for (std::int64_t done = 0; done < warmup;) {
    const auto n = std::min(chunk, warmup - done);
    evolver.advance(psi, n);
    done += n;
    const double norm = l2_norm(psi, cell);
    for (double& x : psi) x /= norm;
  }

  const double duration = static_cast<double>(window) * settings.dt;
  auto decay = [&]() {
    evolver.advance(psi, window);
    const double norm = l2_norm(psi, cell);
    for (double& x : psi) x /= norm;
    return -std::log(norm) * settings.conventions.hbar / duration;
  };
  const double first = decay();
  const double second = decay();
  if (std::abs(first - second) > gs.tolerance * std::max(1.0, std::abs(second))) {
    std::ostringstream os;
    os << "ground-state energy windows disagree: " << first << " vs " << second;
    fail(ErrorCode::NotConverged, os.str());
  }
  return {second, std::move(psi), grid};
}

}  // namespace qaction
