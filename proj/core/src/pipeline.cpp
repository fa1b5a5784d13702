#include "qaction/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "qaction/error.hpp"
#include "qaction/instanton.hpp"
#include "qaction/svg.hpp"

#ifndef QACTION_VERSION
#define QACTION_VERSION "0.0.0"
#endif

namespace qaction {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& why) {
  fail(ErrorCode::ConfigError, where + ": " + why);
}

// Strict view of one JSON object: construction rejects unknown keys.
class Obj {
 public:
  Obj(const Json& j, std::string where, std::initializer_list<std::string_view> allowed)
      : j_(j), where_(std::move(where)) {
    if (!j.is_object()) config_error(where_, "expected an object");
    for (const auto& [key, value] : j.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        config_error(path(key), "unknown key \"" + key + "\"");
      }
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const Json& at(const std::string& key) const { return j_.at(key); }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_number()) config_error(path(key), "expected a number");
    return at(key).get<double>();
  }
  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_number_integer()) config_error(path(key), "expected an integer");
    return at(key).get<int>();
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_number_unsigned()) config_error(path(key), "expected a non-negative integer");
    return at(key).get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_boolean()) config_error(path(key), "expected true or false");
    return at(key).get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_string()) config_error(path(key), "expected a string");
    return at(key).get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    const auto& a = at(key);
    if (!a.is_array()) config_error(path(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number()) config_error(path(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(a[i].get<double>());
    }
    return out;
  }

 private:
  const Json& j_;
  std::string where_;
};

std::string_view offset_name(OffsetConvention c) {
  return c == OffsetConvention::Zero ? "zero" : "ground_state_anchor";
}

SpatialGrid parse_grid(const Obj& stage, int dim, const SpatialGrid& fallback) {
  if (!stage.has("grid")) return fallback;
  const Obj g(stage.at("grid"), stage.path("grid"), {"half_extent", "points_per_axis"});
  SpatialGrid grid = fallback;
  grid.dim = dim;
  grid.half_extent = g.number("half_extent", fallback.half_extent);
  grid.points_per_axis = g.integer("points_per_axis", fallback.points_per_axis);
  try {
    validate(grid);
  } catch (const Error& e) {
    config_error(stage.path("grid"), e.what());
  }
  return grid;
}

void parse_evolution(const Obj& stage, EvolutionSettings& ev) {
  if (!stage.has("evolution")) return;
  const Obj o(stage.at("evolution"), stage.path("evolution"),
              {"dt", "richardson_check", "richardson_tolerance", "extended_precision"});
  ev.dt = o.number("dt", ev.dt);
  ev.richardson_check = o.boolean("richardson_check", ev.richardson_check);
  ev.richardson_tolerance = o.number("richardson_tolerance", ev.richardson_tolerance);
  ev.extended_precision = o.boolean("extended_precision", ev.extended_precision);
  if (!(ev.dt > 0.0)) config_error(o.path("dt"), "must be positive");
}

void parse_table(const Obj& stage, TableOptions& t) {
  if (!stage.has("table")) return;
  const Obj o(stage.at("table"), stage.path("table"), {"underflow_floor", "exploit_symmetry"});
  t.underflow_floor = o.number("underflow_floor", t.underflow_floor);
  t.exploit_symmetry = o.boolean("exploit_symmetry", t.exploit_symmetry);
  if (!(t.underflow_floor > 0.0)) config_error(o.path("underflow_floor"), "must be positive");
}

std::vector<Point> parse_boundary_set(const Json& a, const std::string& where, int dim) {
  if (!a.is_array() || a.empty()) config_error(where, "expected a non-empty array");
  std::vector<Point> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (dim == 1) {
      if (!a[i].is_number()) config_error(w, "expected a number");
      out.push_back({a[i].get<double>(), 0.0});
    } else {
      if (!a[i].is_array() || a[i].size() != 2 || !a[i][0].is_number() || !a[i][1].is_number()) {
        config_error(w, "expected [x, y]");
      }
      out.push_back({a[i][0].get<double>(), a[i][1].get<double>()});
    }
  }
  return out;
}

void parse_fit(const Obj& stage, FitConfig& fit, int dim) {
  if (!stage.has("fit")) return;
  const Obj o(stage.at("fit"), stage.path("fit"),
              {"boundary_set", "max_iterations", "gradient_tolerance", "step_tolerance", "min_mass", "offset",
               "deduplicate_symmetric_pairs", "downweight_large_log", "large_log_threshold", "large_log_weight",
               "path"});
  if (o.has("boundary_set")) fit.boundary_set = parse_boundary_set(o.at("boundary_set"), o.path("boundary_set"), dim);
  fit.max_iterations = o.integer("max_iterations", fit.max_iterations);
  fit.gradient_tolerance = o.number("gradient_tolerance", fit.gradient_tolerance);
  fit.step_tolerance = o.number("step_tolerance", fit.step_tolerance);
  fit.min_mass = o.number("min_mass", fit.min_mass);
  const std::string offset = o.string("offset", std::string(offset_name(fit.offset)));
  if (offset == "zero") {
    fit.offset = OffsetConvention::Zero;
  } else if (offset == "ground_state_anchor") {
    fit.offset = OffsetConvention::GroundStateAnchor;
  } else {
    config_error(o.path("offset"), "expected \"zero\" or \"ground_state_anchor\"");
  }
  fit.deduplicate_symmetric_pairs = o.boolean("deduplicate_symmetric_pairs", fit.deduplicate_symmetric_pairs);
  fit.downweight_large_log = o.boolean("downweight_large_log", fit.downweight_large_log);
  fit.large_log_threshold = o.number("large_log_threshold", fit.large_log_threshold);
  fit.large_log_weight = o.number("large_log_weight", fit.large_log_weight);
  if (fit.max_iterations < 1) config_error(o.path("max_iterations"), "must be at least 1");
  if (!(fit.min_mass > 0.0)) config_error(o.path("min_mass"), "must be positive");
  if (o.has("path")) {
    const Obj p(o.at("path"), o.path("path"), {"slices", "max_iterations", "residual_tolerance", "multistart"});
    fit.path.slices = p.integer("slices", fit.path.slices);
    fit.path.max_iterations = p.integer("max_iterations", fit.path.max_iterations);
    fit.path.residual_tolerance = p.number("residual_tolerance", fit.path.residual_tolerance);
    fit.path.multistart = p.boolean("multistart", fit.path.multistart);
    if (fit.path.slices != 0 && fit.path.slices < 2) config_error(p.path("slices"), "must be 0 (default) or at least 2");
  }
}

Json fit_settings_json(const FitConfig& fit, int dim) {
  Json j;
  const auto boundary = fit.boundary_set.empty() ? default_boundary_set(dim) : fit.boundary_set;
  Json b = Json::array();
  for (const auto& p : boundary) {
    if (dim == 1) {
      b.push_back(p.x);
    } else {
      b.push_back({p.x, p.y});
    }
  }
  j["boundary_set"] = b;
  j["max_iterations"] = fit.max_iterations;
  j["gradient_tolerance"] = fit.gradient_tolerance;
  j["step_tolerance"] = fit.step_tolerance;
  j["min_mass"] = fit.min_mass;
  j["offset"] = std::string(offset_name(fit.offset));
  j["deduplicate_symmetric_pairs"] = fit.deduplicate_symmetric_pairs;
  j["downweight_large_log"] = fit.downweight_large_log;
  j["large_log_threshold"] = fit.large_log_threshold;
  j["large_log_weight"] = fit.large_log_weight;
  j["path"] = {{"slices", fit.path.slices},
               {"max_iterations", fit.path.max_iterations},
               {"residual_tolerance", fit.path.residual_tolerance},
               {"multistart", fit.path.multistart}};
  return j;
}

void stage_numerics_json(Json& j, const FitConfig& fit, int dim) {
  const SpatialGrid grid = fit.grid.value_or(default_grid(dim));
  j["grid"] = {{"half_extent", grid.half_extent}, {"points_per_axis", grid.points_per_axis}};
  j["evolution"] = {{"dt", fit.evolution.dt},
                    {"richardson_check", fit.evolution.richardson_check},
                    {"richardson_tolerance", fit.evolution.richardson_tolerance},
                    {"extended_precision", fit.evolution.extended_precision}};
  j["table"] = {{"underflow_floor", fit.table.underflow_floor}, {"exploit_symmetry", fit.table.exploit_symmetry}};
  j["fit"] = fit_settings_json(fit, dim);
}

void check_times(const std::vector<double>& times, const std::string& where, double dt) {
  if (times.empty()) config_error(where, "needs at least one transition time");
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (!(times[i] > 0.0)) config_error(w, "transition times must be positive");
    if (i > 0 && !(times[i] > times[i - 1])) config_error(w, "transition times must be strictly increasing");
    try {
      step_count(times[i], dt);
    } catch (const Error& e) {
      config_error(w, e.what());
    }
  }
}

void check_boundary(const FitConfig& fit, int dim, const std::string& where) {
  const SpatialGrid grid = fit.grid.value_or(default_grid(dim));
  const auto boundary = fit.boundary_set.empty() ? default_boundary_set(dim) : fit.boundary_set;
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    try {
      grid.node_index(boundary[i]);
    } catch (const Error& e) {
      config_error(where + "[" + std::to_string(i) + "]", e.what());
    }
  }
  const std::size_t n_free = dim == 1 ? 3 : 4;
  if (boundary.size() * boundary.size() < n_free + 2) config_error(where, "too few boundary points for a fit");
}

double time_of_tau(double tau, const Conventions& conv) { return conv.hbar / (conv.k_boltzmann * tau); }

// Compact label for file names: 4 -> "4", 0.25 -> "0.25".
std::string tag(double v) { return format_number(v); }

class Outputs {
 public:
  explicit Outputs(std::filesystem::path root) : root_(std::move(root)) {}

  void write(const std::string& rel, const std::string& content) {
    const std::filesystem::path p(rel);
    if (p.is_absolute() || rel.find("..") != std::string::npos) {
      fail(ErrorCode::IoError, "artifact path escapes the output directory: " + rel);
    }
    const auto full = root_ / p;
    std::error_code ec;
    std::filesystem::create_directories(full.parent_path(), ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + full.parent_path().string() + ": " + ec.message());
    write_text_file(full, content);
    for (const auto& r : records_) {
      if (r.path == rel) fail(ErrorCode::IoError, "artifact written twice: " + rel);
    }
    records_.push_back({rel, sha256_hex(content), content.size()});
  }
  void write_json(const std::string& rel, const Json& j) { write(rel, j.dump(2) + "\n"); }

  const std::filesystem::path& root() const { return root_; }
  std::vector<ArtifactRecord>& records() { return records_; }

 private:
  std::filesystem::path root_;
  std::vector<ArtifactRecord> records_;
};

std::string flow_plot(const ParameterFlow& flow, const std::string& title) {
  const auto names = free_parameter_names(flow.dim);
  std::vector<Series> series(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) series[i].label = names[i] + "~";
  for (const auto& e : flow.entries) {
    if (!e.fit) continue;
    const auto p = free_parameters(e.fit->quantum_action);
    for (std::size_t i = 0; i < p.size(); ++i) {
      series[i].x.push_back(e.transition_time);
      series[i].y.push_back(p[i]);
    }
  }
  return render_svg({title, "transition time T (tau = 1/T)", "parameter value"}, series);
}

std::string section_plot(const PoincareSectionData& s, const std::string& title) {
  Series pts{"", {}, {}, SeriesStyle::Markers};
  for (const auto& t : s.trajectories) {
    for (const auto& c : t.crossings) {
      pts.x.push_back(c.x);
      pts.y.push_back(c.px);
    }
  }
  PlotSpec spec{title, "x", "p_x", 640, 640, 0.6};
  return render_svg(spec, {pts});
}

struct Context {
  const RunConfig& config;
  Outputs& out;
  RunManifest& manifest;
  std::optional<ParameterFlow> flow;
};

void run_flow(Context& ctx) {
  const auto& st = ctx.config.flow;
  auto flow = parameter_flow(st.action, st.times, st.fit);
  for (const auto& e : flow.entries) {
    if (!e.table) continue;
    const std::string base = "flow/tables/table_T" + tag(e.transition_time);
    ctx.out.write(base + ".csv", table_to_csv(*e.table));
    Json meta = to_json(*e.table);
    meta.erase("pairs");
    ctx.out.write_json(base + ".json", meta);
  }
  ctx.out.write("flow/parameter_flow.csv", flow_to_csv(flow));
  ctx.out.write_json("flow/parameter_flow.json", to_json(flow));
  ctx.out.write("flow/parameter_flow.svg", flow_plot(flow, "Quantum action parameters vs transition time"));
  ctx.flow = std::move(flow);
}

void run_instanton(Context& ctx) {
  const auto& st = ctx.config.instanton;
  std::vector<Series> plot;
  const auto emit = [&](const InstantonProfile& p, const std::string& name, const std::string& label) {
    ctx.out.write("instanton/" + name + ".csv", instanton_to_csv(p));
    ctx.out.write_json("instanton/" + name + ".json", instanton_sidecar(p));
    plot.push_back({label, p.times, p.positions, SeriesStyle::Line});
  };
  emit(find_instanton(ctx.config.flow.action), "instanton_classical", "classical (T = 0)");
  for (double T : st.times) {
    emit(quantum_instanton(*ctx.flow, T), "instanton_quantum_T" + tag(T), "quantum, T = " + tag(T));
  }
  ctx.out.write("instanton/instantons.svg", render_svg({"Instantons", "imaginary time t", "x(t)"}, plot));
}

struct ShellResult {
  PoincareSectionData section;
  std::vector<LyapunovEstimate> lyapunov;
  std::size_t chaotic = 0;
};

ShellResult analyze_shell(const ActionSpec& action, double energy, const PoincareStage& st, std::uint64_t seed) {
  ShellResult r;
  const auto states = sample_energy_shell(action, energy, st.n_states, seed);
  r.section = poincare_section(action, states, energy, st.section);
  for (const auto& s : states) {
    r.lyapunov.push_back(lyapunov_max(action, s, st.lyapunov));
    if (r.lyapunov.back().chaotic()) ++r.chaotic;
  }
  return r;
}

void run_poincare(Context& ctx) {
  const auto& st = ctx.config.poincare;
  struct Variant {
    std::string name;
    std::string label;
    ActionSpec action;
    std::optional<TemperaturePoint> temperature;
  };
  std::vector<Variant> variants{{"classical", "classical action", st.action, std::nullopt}};
  for (double tau : st.taus) {
    const double T = time_of_tau(tau, st.fit.conventions);
    const std::vector<double> times{T};
    const auto flow = parameter_flow(st.action, times, st.fit);
    const auto& e = flow.entries.front();
    const std::string base = "poincare/quantum_action_tau" + tag(tau);
    if (e.table) ctx.out.write(base + "_table.csv", table_to_csv(*e.table));
    if (!e.fit) fail(ErrorCode::NotConverged, "quantum action at tau=" + tag(tau) + ": " + e.error);
    ctx.out.write_json(base + ".json", to_json(*e.fit));
    variants.push_back({"quantum_tau" + tag(tau), "quantum action, tau = " + tag(tau), e.fit->quantum_action,
                        e.fit->temperature});
  }

  Json summary;
  summary["threshold"] = st.lyapunov.chaos_threshold;
  summary["lyapunov"] = {{"dt", st.lyapunov.dt},
                         {"t_max", st.lyapunov.t_max},
                         {"renorm_interval", st.lyapunov.renorm_interval},
                         {"initial_separation", st.lyapunov.initial_separation}};
  summary["seed"] = ctx.config.seed;
  Json per_energy = Json::array();
  for (double E : st.energies) {
    Json row;
    row["E"] = E;
    std::vector<double> ref_x;
    std::vector<double> ref_px;
    Json actions = Json::array();
    for (const auto& v : variants) {
      auto res = analyze_shell(v.action, E, st, ctx.config.seed);
      res.section.temperature = v.temperature;
      const std::string base = "poincare/E" + tag(E) + "/" + v.name;
      ctx.out.write(base + "_section.csv", section_to_csv(res.section));
      ctx.out.write_json(base + "_section.json", section_metadata(res.section, st.lyapunov.chaos_threshold));
      ctx.out.write(base + "_section.svg", section_plot(res.section, "Poincare section (y = 0, p_y > 0), " + v.label +
                                                                         ", E = " + tag(E)));
      ctx.out.write(base + "_lyapunov.csv", lyapunov_to_csv(res.lyapunov));

      std::vector<double> xs;
      std::vector<double> pxs;
      for (const auto& t : res.section.trajectories) {
        for (const auto& c : t.crossings) {
          xs.push_back(c.x);
          pxs.push_back(c.px);
        }
      }
      Json a;
      a["name"] = v.name;
      a["action_kind"] = std::string(to_string(v.action.kind));
      a["tau"] = v.temperature ? Json(v.temperature->tau) : Json(nullptr);
      a["n_states"] = res.lyapunov.size();
      a["n_chaotic"] = res.chaotic;
      a["chaotic_fraction"] = static_cast<double>(res.chaotic) / static_cast<double>(res.lyapunov.size());
      a["n_crossings"] = res.section.total_crossings();
      if (v.temperature) {
        const auto kx = ks_two_sample(ref_x, xs);
        const auto kp = ks_two_sample(ref_px, pxs);
        a["ks_vs_classical"] = {{"x", {{"statistic", kx.statistic}, {"p_value", kx.p_value}}},
                                {"px", {{"statistic", kp.statistic}, {"p_value", kp.p_value}}}};
      } else {
        ref_x = std::move(xs);
        ref_px = std::move(pxs);
      }
      actions.push_back(a);
    }
    row["actions"] = actions;
    per_energy.push_back(row);
  }
  summary["energies"] = per_energy;
  ctx.out.write_json("poincare/chaos_summary.json", summary);
}

}  // namespace

FlowStage::FlowStage() {
  fit.grid = default_grid(1);
  fit.evolution.dt = 5e-4;
}

PoincareStage::PoincareStage() {
  fit.grid = default_grid(2);
  fit.evolution.dt = 1e-3;
}

std::string_view to_string(Experiment e) noexcept {
  switch (e) {
    case Experiment::Flow: return "flow";
    case Experiment::Instanton: return "instanton";
    case Experiment::Poincare: return "poincare";
    case Experiment::Full: return "full";
  }
  return "full";
}

Experiment experiment_from_string(std::string_view s) {
  if (s == "flow") return Experiment::Flow;
  if (s == "instanton") return Experiment::Instanton;
  if (s == "poincare") return Experiment::Poincare;
  if (s == "full") return Experiment::Full;
  fail(ErrorCode::ConfigError, "experiment: expected flow, instanton, poincare or full, got \"" + std::string(s) + "\"");
}

RunConfig parse_config_json(const Json& j) {
  const Obj top(j, "", {"experiment", "output_dir", "seed", "flow", "instanton", "poincare"});
  RunConfig c;
  c.experiment = experiment_from_string(top.string("experiment", std::string(to_string(c.experiment))));
  c.output_dir = top.string("output_dir", c.output_dir.string());
  c.seed = top.unsigned_integer("seed", c.seed);

  if (top.has("flow")) {
    const Obj f(top.at("flow"), "flow", {"action", "times", "grid", "evolution", "table", "fit"});
    auto& st = c.flow;
    if (f.has("action")) st.action = action_from_json(f.at("action"), "flow.action");
    if (st.action.dim() != 1) config_error("flow.action", "the flow experiment needs a 1-D action");
    st.times = f.numbers("times", st.times);
    st.fit.grid = parse_grid(f, 1, *st.fit.grid);
    parse_evolution(f, st.fit.evolution);
    parse_table(f, st.fit.table);
    parse_fit(f, st.fit, 1);
  }
  if (top.has("instanton")) {
    const Obj i(top.at("instanton"), "instanton", {"times"});
    c.instanton.times = i.numbers("times", c.instanton.times);
  }
  if (top.has("poincare")) {
    const Obj p(top.at("poincare"), "poincare",
                {"action", "energies", "taus", "n_states", "section", "lyapunov", "grid", "evolution", "table", "fit"});
    auto& st = c.poincare;
    if (p.has("action")) st.action = action_from_json(p.at("action"), "poincare.action");
    if (st.action.dim() != 2) config_error("poincare.action", "the poincare experiment needs a 2-D action");
    st.energies = p.numbers("energies", st.energies);
    st.taus = p.numbers("taus", st.taus);
    st.n_states = static_cast<std::size_t>(p.unsigned_integer("n_states", st.n_states));
    if (p.has("section")) {
      const Obj s(p.at("section"), "poincare.section", {"dt", "max_crossings", "time_cap", "drift_flag"});
      st.section.dt = s.number("dt", st.section.dt);
      st.section.max_crossings = static_cast<std::size_t>(s.unsigned_integer("max_crossings", st.section.max_crossings));
      st.section.time_cap = s.number("time_cap", st.section.time_cap);
      st.section.drift_flag = s.number("drift_flag", st.section.drift_flag);
    }
    if (p.has("lyapunov")) {
      const Obj l(p.at("lyapunov"), "poincare.lyapunov",
                  {"dt", "t_max", "renorm_interval", "initial_separation", "threshold"});
      st.lyapunov.dt = l.number("dt", st.lyapunov.dt);
      st.lyapunov.t_max = l.number("t_max", st.lyapunov.t_max);
      st.lyapunov.renorm_interval = l.number("renorm_interval", st.lyapunov.renorm_interval);
      st.lyapunov.initial_separation = l.number("initial_separation", st.lyapunov.initial_separation);
      st.lyapunov.chaos_threshold = l.number("threshold", st.lyapunov.chaos_threshold);
    }
    st.fit.grid = parse_grid(p, 2, *st.fit.grid);
    parse_evolution(p, st.fit.evolution);
    parse_table(p, st.fit.table);
    parse_fit(p, st.fit, 2);
  }
  validate(c);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ConfigError, "config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config_json(j);
}

void validate(const RunConfig& c) {
  const auto& fl = c.flow;
  check_times(fl.times, "flow.times", fl.fit.evolution.dt);
  check_boundary(fl.fit, 1, "flow.fit.boundary_set");
  if (c.experiment == Experiment::Instanton || c.experiment == Experiment::Full) {
    const auto& p = fl.action.potential_1d();
    if (!(p.v2 < 0.0 && p.v4 > 0.0)) config_error("flow.action", "instantons need a double well (v2 < 0, v4 > 0)");
    for (std::size_t i = 0; i < c.instanton.times.size(); ++i) {
      const double T = c.instanton.times[i];
      const bool listed = std::any_of(fl.times.begin(), fl.times.end(),
                                      [T](double t) { return std::abs(t - T) <= 1e-9 * std::max(1.0, T); });
      if (!listed) config_error("instanton.times[" + std::to_string(i) + "]", "must be one of flow.times");
    }
  }

  const auto& pc = c.poincare;
  if (pc.energies.empty()) config_error("poincare.energies", "needs at least one energy");
  const double floor = potential_minimum_value(pc.action.potential);
  for (std::size_t i = 0; i < pc.energies.size(); ++i) {
    if (!(pc.energies[i] > floor)) {
      config_error("poincare.energies[" + std::to_string(i) + "]", "energy must exceed the potential minimum");
    }
  }
  for (std::size_t i = 0; i < pc.taus.size(); ++i) {
    const std::string w = "poincare.taus[" + std::to_string(i) + "]";
    if (!(pc.taus[i] > 0.0)) config_error(w, "temperatures must be positive");
    try {
      step_count(time_of_tau(pc.taus[i], pc.fit.conventions), pc.fit.evolution.dt);
    } catch (const Error& e) {
      config_error(w, e.what());
    }
  }
  check_boundary(pc.fit, 2, "poincare.fit.boundary_set");
  if (pc.n_states < 1) config_error("poincare.n_states", "must be at least 1");
  if (!(pc.section.dt > 0.0)) config_error("poincare.section.dt", "must be positive");
  if (pc.section.max_crossings < 2) config_error("poincare.section.max_crossings", "must be at least 2");
  if (!(pc.section.time_cap > pc.section.dt)) config_error("poincare.section.time_cap", "must exceed dt");
  const auto& ly = pc.lyapunov;
  if (!(ly.dt > 0.0)) config_error("poincare.lyapunov.dt", "must be positive");
  if (!(ly.renorm_interval >= ly.dt)) config_error("poincare.lyapunov.renorm_interval", "must be at least dt");
  if (!(ly.t_max >= 4.0 * ly.renorm_interval)) {
    config_error("poincare.lyapunov.t_max", "must be at least four renormalization intervals");
  }
  if (!(ly.initial_separation > 0.0)) config_error("poincare.lyapunov.initial_separation", "must be positive");
}

Json config_to_json(const RunConfig& c) {
  Json j;
  j["experiment"] = std::string(to_string(c.experiment));
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  Json f;
  f["action"] = to_json(c.flow.action);
  f["times"] = c.flow.times;
  stage_numerics_json(f, c.flow.fit, 1);
  j["flow"] = f;
  j["instanton"] = {{"times", c.instanton.times}};
  const auto& pc = c.poincare;
  Json p;
  p["action"] = to_json(pc.action);
  p["energies"] = pc.energies;
  p["taus"] = pc.taus;
  p["n_states"] = pc.n_states;
  p["section"] = {{"dt", pc.section.dt},
                  {"max_crossings", pc.section.max_crossings},
                  {"time_cap", pc.section.time_cap},
                  {"drift_flag", pc.section.drift_flag}};
  p["lyapunov"] = {{"dt", pc.lyapunov.dt},
                   {"t_max", pc.lyapunov.t_max},
                   {"renorm_interval", pc.lyapunov.renorm_interval},
                   {"initial_separation", pc.lyapunov.initial_separation},
                   {"threshold", pc.lyapunov.chaos_threshold}};
  stage_numerics_json(p, pc.fit, 2);
  j["poincare"] = p;
  return j;
}

Json to_json(const RunManifest& m) {
  Json j;
  j["software"] = "qaction " + m.version;
  j["status"] = m.ok() ? "ok" : "failed";
  if (m.failure) {
    j["failure"] = {{"stage", m.failure->stage}, {"code", m.failure->code}, {"message", m.failure->message}};
  }
  j["config"] = m.config;
  Json a = Json::array();
  for (const auto& r : m.artifacts) a.push_back({{"path", r.path}, {"sha256", r.sha256}, {"bytes", r.bytes}});
  j["artifacts"] = a;
  Json t;
  for (const auto& [stage, seconds] : m.timings) t[stage] = seconds;
  j["timings_seconds"] = t;
  return j;
}

RunManifest run_pipeline(const RunConfig& config) {
  validate(config);
  RunManifest manifest;
  manifest.version = QACTION_VERSION;
  manifest.config = config_to_json(config);
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create output directory " + config.output_dir.string() + ": " + ec.message());
  manifest.location = config.output_dir / "manifest.json";

  Outputs out(config.output_dir);
  Context ctx{config, out, manifest, std::nullopt};

  std::vector<std::pair<std::string, std::function<void(Context&)>>> stages;
  const auto e = config.experiment;
  if (e == Experiment::Flow || e == Experiment::Instanton || e == Experiment::Full) stages.emplace_back("flow", run_flow);
  if (e == Experiment::Instanton || e == Experiment::Full) stages.emplace_back("instanton", run_instanton);
  if (e == Experiment::Poincare || e == Experiment::Full) stages.emplace_back("poincare", run_poincare);

  std::exception_ptr error;
  for (const auto& [name, stage] : stages) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      stage(ctx);
    } catch (const Error& err) {
      manifest.failure = StageFailure{name, std::string(to_string(err.code())), err.what()};
      error = std::current_exception();
    } catch (const std::exception& err) {
      manifest.failure = StageFailure{name, "InternalError", err.what()};
      error = std::current_exception();
    }
    manifest.timings.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (error) break;
  }
  manifest.artifacts = out.records();
  write_text_file(manifest.location, to_json(manifest).dump(2) + "\n");
  if (error) std::rethrow_exception(error);
  return manifest;
}

}  // namespace qaction
