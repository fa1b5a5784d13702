#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qaction/dynamics.hpp"
#include "qaction/fit.hpp"
#include "qaction/io.hpp"

namespace qaction {

enum class Experiment { Flow, Instanton, Poincare, Full };

std::string_view to_string(Experiment e) noexcept;
Experiment experiment_from_string(std::string_view s);

/// Double-well parameter flow; also feeds the instanton stage.
struct FlowStage {
  ActionSpec action = make_action(1.0, Potential1D{0.5, -1.0, 0.5});
  std::vector<double> times{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
  /// grid, evolution and table settings live inside the fit config.
  FitConfig fit;

  FlowStage();
};

struct InstantonStage {
  /// Transition times (a subset of the flow times) whose quantum action
  /// gets an instanton profile; the classical one is always produced.
  std::vector<double> times{4.0};
};

/// Classical vs quantum Poincare sections and Lyapunov classification.
struct PoincareStage {
  ActionSpec action = make_action(1.0, Potential2D{0.0, 0.5, 0.05, 0.0});
  std::vector<double> energies{5.0, 10.0, 20.0};
  /// Temperatures of the quantum actions; each is fitted at T = hbar / (k_B tau).
  std::vector<double> taus{0.25};
  std::size_t n_states = 20;
  SectionSettings section;
  LyapunovSettings lyapunov;
  FitConfig fit;

  PoincareStage();
};

struct RunConfig {
  Experiment experiment = Experiment::Full;
  std::filesystem::path output_dir = "qaction-out";
  std::uint64_t seed = 42;
  FlowStage flow;
  InstantonStage instanton;
  PoincareStage poincare;
};

/// Strict parse: unknown keys, type mismatches and settings that violate a
/// module precondition raise ConfigError naming the key path.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const Json& j);
/// Every setting, defaults included, in the same schema parse_config reads.
Json config_to_json(const RunConfig& config);
/// Precondition checks run before any computation.
void validate(const RunConfig& config);

struct ArtifactRecord {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
};

struct StageFailure {
  std::string stage;
  std::string code;
  std::string message;
};

struct RunManifest {
  std::string version;
  Json config;
  std::vector<ArtifactRecord> artifacts;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  std::optional<StageFailure> failure;
  std::filesystem::path location;

  bool ok() const noexcept { return !failure.has_value(); }
};

Json to_json(const RunManifest& manifest);

/// Runs the configured experiment, writing every artifact under
/// config.output_dir and the manifest (manifest.json) last. A module error
/// stops the run; the manifest is still written, listing what was produced
/// and the failure, and the error is then rethrown.
RunManifest run_pipeline(const RunConfig& config);

}  // namespace qaction
