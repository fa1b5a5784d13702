#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "qaction/dynamics.hpp"
#include "qaction/fit.hpp"
#include "qaction/instanton.hpp"
#include "qaction/model.hpp"
#include "qaction/path.hpp"
#include "qaction/propagator.hpp"

namespace qaction {

/// Key order is preserved so that emitted documents are byte-stable.
using Json = nlohmann::ordered_json;

/// Shortest decimal form that round-trips to the same double.
std::string format_number(double v);

/// {kind, mass, dim, coefficients: {v0, v2, v4} or {v0, v2, v22, v4}}
Json to_json(const ActionSpec& action);
/// Strict: unknown keys, wrong types and unbounded potentials raise
/// ConfigError naming the offending key under `where`.
ActionSpec action_from_json(const Json& j, const std::string& where = "action");

Json to_json(const SpatialGrid& grid);
Json to_json(const TemperaturePoint& t);

/// Columns x_in[,y_in],x_fi[,y_fi],T,G
std::string table_to_csv(const AmplitudeTable& table);
Json to_json(const AmplitudeTable& table);

Json to_json(const QuantumActionFit& fit);
Json to_json(const ParameterFlow& flow);
/// Columns T,tau,m,v0,v2[,v22],v4,log_z,residual_rms; one row per successful fit.
std::string flow_to_csv(const ParameterFlow& flow);

/// Columns t,x[,y]
std::string path_to_csv(const TrajectoryBV& path);

/// Columns t,x
std::string instanton_to_csv(const InstantonProfile& profile);
/// {x_m, omega_inst, S_inst, T, tau}; T = 0 and tau = null for the classical action.
Json instanton_sidecar(const InstantonProfile& profile);

/// Columns traj_id,crossing_idx,x,px
std::string section_to_csv(const PoincareSectionData& section);
/// {E, T, tau, action_kind, dt, threshold, ...}
Json section_metadata(const PoincareSectionData& section, double chaos_threshold);
/// Columns traj_id,lambda_max
std::string lyapunov_to_csv(std::span<const LyapunovEstimate> estimates);

/// Writes the whole file or throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);

}  // namespace qaction
