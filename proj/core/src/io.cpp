#include "qaction/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qaction/error.hpp"

namespace qaction {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& why) {
  fail(ErrorCode::ConfigError, where + ": " + why);
}

void reject_unknown_keys(const Json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) config_error(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) config_error(where + "." + key, "unknown key \"" + key + "\"");
  }
}

double number_at(const Json& j, const std::string& key, const std::string& where, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) config_error(where + "." + key, "expected a number");
  return v.get<double>();
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string csv_row(std::initializer_list<double> values) {
  std::string row;
  bool first = true;
  for (double v : values) {
    if (!first) row += ',';
    row += format_number(v);
    first = false;
  }
  row += '\n';
  return row;
}

}  // namespace

std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return "nan";
  return {buf.data(), end};
}

Json to_json(const ActionSpec& action) {
  Json j;
  j["kind"] = std::string(to_string(action.kind));
  j["mass"] = action.mass;
  j["dim"] = action.dim();
  Json c;
  if (action.dim() == 1) {
    const auto& p = action.potential_1d();
    c["v0"] = p.v0;
    c["v2"] = p.v2;
    c["v4"] = p.v4;
  } else {
    const auto& p = action.potential_2d();
    c["v0"] = p.v0;
    c["v2"] = p.v2;
    c["v22"] = p.v22;
    c["v4"] = p.v4;
  }
  j["coefficients"] = c;
  return j;
}

ActionSpec action_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j, where, {"kind", "mass", "dim", "coefficients"});
  ActionSpec out;
  if (j.contains("kind")) {
    if (!j.at("kind").is_string()) config_error(where + ".kind", "expected a string");
    try {
      out.kind = action_kind_from_string(j.at("kind").get<std::string>());
    } catch (const Error& e) {
      config_error(where + ".kind", e.what());
    }
  }
  if (!j.contains("mass")) config_error(where + ".mass", "missing required key");
  out.mass = number_at(j, "mass", where, 1.0);
  if (!(out.mass > 0.0)) config_error(where + ".mass", "mass must be positive");
  if (!j.contains("coefficients")) config_error(where + ".coefficients", "missing required key");
  const auto& c = j.at("coefficients");
  const std::string cw = where + ".coefficients";
  if (!c.is_object()) config_error(cw, "expected an object");
  int dim = c.contains("v22") ? 2 : 1;
  if (j.contains("dim")) {
    const auto& d = j.at("dim");
    if (!d.is_number_integer() || (d.get<int>() != 1 && d.get<int>() != 2)) config_error(where + ".dim", "must be 1 or 2");
    dim = d.get<int>();
  }
  if (dim == 1) {
    reject_unknown_keys(c, cw, {"v0", "v2", "v4"});
    out.potential = Potential1D{number_at(c, "v0", cw, 0.0), number_at(c, "v2", cw, 0.0), number_at(c, "v4", cw, 0.0)};
  } else {
    reject_unknown_keys(c, cw, {"v0", "v2", "v22", "v4"});
    out.potential = Potential2D{number_at(c, "v0", cw, 0.0), number_at(c, "v2", cw, 0.0), number_at(c, "v22", cw, 0.0),
                                number_at(c, "v4", cw, 0.0)};
  }
  const double v2 = dim == 1 ? out.potential_1d().v2 : out.potential_2d().v2;
  const double v4 = dim == 1 ? out.potential_1d().v4 : out.potential_2d().v4;
  if (v4 < 0.0) config_error(cw + ".v4", "v4 < 0 makes the potential unbounded below");
  if (dim == 2 && out.potential_2d().v22 < 0.0)
    config_error(cw + ".v22", "v22 < 0 makes the potential unbounded below");
  if (v4 == 0.0 && v2 < 0.0) config_error(cw + ".v2", "v2 < 0 with v4 = 0 makes the potential unbounded below");
  return out;
}

Json to_json(const SpatialGrid& grid) {
  Json j;
  j["dim"] = grid.dim;
  j["half_extent"] = grid.half_extent;
  j["points_per_axis"] = grid.points_per_axis;
  j["spacing"] = grid.spacing();
  return j;
}

Json to_json(const TemperaturePoint& t) {
  Json j;
  j["T"] = t.transition_time;
  j["beta"] = t.beta;
  j["tau"] = t.tau;
  return j;
}

std::string table_to_csv(const AmplitudeTable& table) {
  std::string out = table.dim == 1 ? "x_in,x_fi,T,G\n" : "x_in,y_in,x_fi,y_fi,T,G\n";
  for (const auto& e : table.pairs) {
    if (table.dim == 1) {
      out += csv_row({e.x_in.x, e.x_fi.x, table.duration, e.g});
    } else {
      out += csv_row({e.x_in.x, e.x_in.y, e.x_fi.x, e.x_fi.y, table.duration, e.g});
    }
  }
  return out;
}

Json to_json(const AmplitudeTable& table) {
  Json j;
  j["T"] = table.duration;
  j["dim"] = table.dim;
  Json meta;
  meta["grid"] = to_json(table.metadata.grid);
  meta["dt"] = table.metadata.dt;
  meta["underflow_floor"] = table.metadata.underflow_floor;
  meta["dropped_count"] = table.metadata.dropped_count;
  meta["kernel_evolutions"] = table.metadata.kernel_evolutions;
  j["metadata"] = meta;
  Json pairs = Json::array();
  for (const auto& e : table.pairs) {
    Json p;
    if (table.dim == 1) {
      p["x_in"] = e.x_in.x;
      p["x_fi"] = e.x_fi.x;
    } else {
      p["x_in"] = {e.x_in.x, e.x_in.y};
      p["x_fi"] = {e.x_fi.x, e.x_fi.y};
    }
    p["G"] = e.g;
    pairs.push_back(p);
  }
  j["pairs"] = pairs;
  return j;
}

Json to_json(const QuantumActionFit& fit) {
  Json j;
  j["temperature"] = to_json(fit.temperature);
  j["quantum_action"] = to_json(fit.quantum_action);
  j["log_z"] = fit.log_z;
  j["residual_rms"] = fit.residual_rms;
  j["residual_max"] = fit.residual_max;
  j["n_points"] = fit.n_points;
  j["iterations"] = fit.iterations;
  j["gradient_norm"] = fit.gradient_norm;
  j["residuals"] = fit.residuals;
  return j;
}

Json to_json(const ParameterFlow& flow) {
  Json j;
  j["dim"] = flow.dim;
  Json entries = Json::array();
  for (const auto& e : flow.entries) {
    Json row;
    row["T"] = e.transition_time;
    if (e.fit) {
      row["fit"] = to_json(*e.fit);
    } else {
      row["fit"] = nullptr;
      row["error"] = e.error;
    }
    entries.push_back(row);
  }
  j["entries"] = entries;
  return j;
}

std::string flow_to_csv(const ParameterFlow& flow) {
  std::string out = flow.dim == 1 ? "T,tau,m,v0,v2,v4,log_z,residual_rms\n" : "T,tau,m,v0,v2,v22,v4,log_z,residual_rms\n";
  for (const auto& e : flow.entries) {
    if (!e.fit) continue;
    const auto& f = *e.fit;
    const auto& a = f.quantum_action;
    if (flow.dim == 1) {
      const auto& p = a.potential_1d();
      out += csv_row({f.temperature.transition_time, f.temperature.tau, a.mass, p.v0, p.v2, p.v4, f.log_z, f.residual_rms});
    } else {
      const auto& p = a.potential_2d();
      out += csv_row({f.temperature.transition_time, f.temperature.tau, a.mass, p.v0, p.v2, p.v22, p.v4, f.log_z,
                      f.residual_rms});
    }
  }
  return out;
}

std::string path_to_csv(const TrajectoryBV& path) {
  const bool two_d = path.action.dim() == 2;
  std::string out = two_d ? "t,x,y\n" : "t,x\n";
  const double dt = path.time_step();
  for (std::size_t k = 0; k < path.slices.size(); ++k) {
    const double t = static_cast<double>(k) * dt;
    out += two_d ? csv_row({t, path.slices[k].x, path.slices[k].y}) : csv_row({t, path.slices[k].x});
  }
  return out;
}

std::string instanton_to_csv(const InstantonProfile& profile) {
  std::string out = "t,x\n";
  for (std::size_t i = 0; i < profile.times.size(); ++i) out += csv_row({profile.times[i], profile.positions[i]});
  return out;
}

Json instanton_sidecar(const InstantonProfile& profile) {
  const auto s = instanton_action(profile);
  Json j;
  j["x_m"] = profile.asymptote;
  j["omega_inst"] = profile.rate;
  j["S_inst"] = s.value;
  j["S_inst_quadrature"] = s.quadrature;
  j["T"] = profile.temperature ? profile.temperature->transition_time : 0.0;
  j["tau"] = profile.temperature ? Json(profile.temperature->tau) : Json(nullptr);
  j["action"] = to_json(profile.action);
  return j;
}

std::string section_to_csv(const PoincareSectionData& section) {
  std::ostringstream os;
  os << "traj_id,crossing_idx,x,px\n";
  for (std::size_t t = 0; t < section.trajectories.size(); ++t) {
    const auto& c = section.trajectories[t].crossings;
    for (std::size_t i = 0; i < c.size(); ++i) {
      os << t << ',' << i << ',' << format_number(c[i].x) << ',' << format_number(c[i].px) << '\n';
    }
  }
  return os.str();
}

Json section_metadata(const PoincareSectionData& section, double chaos_threshold) {
  Json j;
  j["E"] = section.energy;
  j["T"] = section.temperature ? section.temperature->transition_time : 0.0;
  j["tau"] = section.temperature ? Json(section.temperature->tau) : Json(nullptr);
  j["action_kind"] = std::string(to_string(section.action.kind));
  j["dt"] = section.settings.dt;
  j["threshold"] = chaos_threshold;
  j["plane"] = {{"coordinate", "y"}, {"value", 0.0}, {"direction", 1}};
  j["max_crossings"] = section.settings.max_crossings;
  j["time_cap"] = section.settings.time_cap;
  j["action"] = to_json(section.action);
  double worst_energy = 0.0;
  double worst_plane = 0.0;
  Json flagged = Json::array();
  for (std::size_t t = 0; t < section.trajectories.size(); ++t) {
    const auto& tr = section.trajectories[t];
    worst_energy = std::max(worst_energy, tr.max_energy_error);
    worst_plane = std::max(worst_plane, tr.max_plane_offset);
    if (tr.drift_flagged) flagged.push_back(t);
  }
  j["n_trajectories"] = section.trajectories.size();
  j["n_crossings"] = section.total_crossings();
  j["max_relative_energy_error"] = number_or_null(worst_energy);
  j["max_plane_offset"] = number_or_null(worst_plane);
  j["drift_flagged"] = flagged;
  return j;
}

std::string lyapunov_to_csv(std::span<const LyapunovEstimate> estimates) {
  std::ostringstream os;
  os << "traj_id,lambda_max\n";
  for (std::size_t i = 0; i < estimates.size(); ++i) os << i << ',' << format_number(estimates[i].lambda_max) << '\n';
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) fail(ErrorCode::IoError, "failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::IoError, "SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

}  // namespace qaction
