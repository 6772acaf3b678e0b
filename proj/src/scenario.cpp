#include "wfmpc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wfmpc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw std::invalid_argument("scenario: field '" + field + "': " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!j.is_object()) fail(context, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) fail(context + "." + key, "unknown field");
  }
}

double get_number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) fail(key, "expected a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) fail(key, "expected an integer");
  return j.at(key).get<int>();
}

std::string get_string(const json& j, const std::string& key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) fail(key, "expected a string");
  return j.at(key).get<std::string>();
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) fail(key, "expected a boolean");
  return j.at(key).get<bool>();
}

FarmLayout parse_farm(const json& farm) {
  check_keys(farm,
             {"layout", "rotor_diameter_m", "wind_direction_deg", "wake_decay",
              "advection_smoothing_s", "reference_advection_mps"},
             "farm");
  FarmLayout layout;
  layout.rotor_diameter_m = get_number(farm, "rotor_diameter_m", 126.0);
  layout.wind_direction_deg = get_number(farm, "wind_direction_deg", 0.0);
  layout.wake_decay = get_number(farm, "wake_decay", 0.05);
  layout.advection_smoothing_s = get_number(farm, "advection_smoothing_s", 5.0);

  if (!farm.contains("layout")) fail("farm.layout", "required");
  const json& spec = farm.at("layout");
  const std::string type = get_string(spec, "type", "");
  if (type == "column") {
    check_keys(spec, {"type", "count", "spacing_diameters"}, "farm.layout");
    const int count = get_int(spec, "count", 8);
    if (count < 1) fail("farm.layout.count", "must be >= 1");
    const double spacing = get_number(spec, "spacing_diameters", 5.0);
    layout.positions_m =
        FarmLayout::column(static_cast<std::size_t>(count), spacing,
                           layout.rotor_diameter_m)
            .positions_m;
  } else if (type == "grid") {
    check_keys(spec,
               {"type", "streamwise", "lateral", "spacing_diameters",
                "lateral_spacing_diameters"},
               "farm.layout");
    const int ns = get_int(spec, "streamwise", 8);
    const int nl = get_int(spec, "lateral", 8);
    if (ns < 1 || nl < 1) fail("farm.layout", "grid sizes must be >= 1");
    const double ds =
        get_number(spec, "spacing_diameters", 5.0) * layout.rotor_diameter_m;
    const double dl = get_number(spec, "lateral_spacing_diameters", 5.0) *
                      layout.rotor_diameter_m;
    for (int col = 0; col < nl; ++col) {
      for (int row = 0; row < ns; ++row) {
        layout.positions_m.emplace_back(ds * row, dl * col);
      }
    }
  } else if (type == "positions") {
    check_keys(spec, {"type", "positions_m"}, "farm.layout");
    if (!spec.contains("positions_m") || !spec.at("positions_m").is_array()) {
      fail("farm.layout.positions_m", "expected an array of [x, y] pairs");
    }
    for (const auto& p : spec.at("positions_m")) {
      if (!p.is_array() || p.size() != 2) {
        fail("farm.layout.positions_m", "expected [x, y] pairs");
      }
      layout.positions_m.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
  } else {
    fail("farm.layout.type", "must be column, grid or positions");
  }
  return layout;
}

TurbineParams parse_turbine(const json& j) {
  check_keys(j,
             {"air_density", "rotor_radius_m", "inertia_kgm2", "gearbox_ratio",
              "torque_kp", "torque_ki", "converter_tau_s", "gen_torque_max_nm",
              "pitch_kp", "pitch_ki", "pitch_rate_limit_deg_s", "pitch_max_deg",
              "rated_power_w", "rotor_speed_min_rads", "rotor_speed_max_rads",
              "lambda_star", "beta_sensitivity", "servo_substeps",
              "ct_table_csv"},
             "turbine");
  TurbineParams params =
      TurbineParams::with_radius(get_number(j, "rotor_radius_m", 63.0));
  params.air_density = get_number(j, "air_density", 1.2);
  params.inertia_kgm2 = get_number(j, "inertia_kgm2", 4.0e7);
  params.gearbox_ratio = get_number(j, "gearbox_ratio", 97.0);
  params.torque_kp = get_number(j, "torque_kp", 2.6e6);
  params.torque_ki = get_number(j, "torque_ki", 2.5e6);
  params.converter_tau_s = get_number(j, "converter_tau_s", 0.1);
  params.gen_torque_max_nm = get_number(j, "gen_torque_max_nm", 1.0e6);
  params.pitch_kp = get_number(j, "pitch_kp", 15.0);
  params.pitch_ki = get_number(j, "pitch_ki", 8.0);
  params.pitch_rate_limit_deg_s = get_number(j, "pitch_rate_limit_deg_s", 8.0);
  params.pitch_max_deg = get_number(j, "pitch_max_deg", 45.0);
  params.rated_power_w = get_number(j, "rated_power_w", 5.0e6);
  params.rotor_speed_min_rads = get_number(j, "rotor_speed_min_rads", 0.01);
  params.rotor_speed_max_rads = get_number(j, "rotor_speed_max_rads", 1.9);
  params.lambda_star = get_number(j, "lambda_star", 8.0);
  params.beta_sensitivity = get_number(j, "beta_sensitivity", 0.08);
  params.servo_substeps = get_int(j, "servo_substeps", 20);
  return params;
}

TraceSource parse_source(const std::string& text, const std::string& field) {
  if (text == "synthetic") return TraceSource::kSynthetic;
  if (text == "constant") return TraceSource::kConstant;
  if (text == "csv") return TraceSource::kCsv;
  fail(field, "must be synthetic, constant or csv");
}

std::string source_name(TraceSource source) {
  switch (source) {
    case TraceSource::kSynthetic: return "synthetic";
    case TraceSource::kConstant: return "constant";
    case TraceSource::kCsv: return "csv";
  }
  return "synthetic";
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kProposed: return "proposed";
    case RunMode::kBaseline: return "baseline";
    case RunMode::kTrackingOnly: return "tracking-only";
  }
  return "proposed";
}

RunMode run_mode_from_string(const std::string& text) {
  if (text == "proposed") return RunMode::kProposed;
  if (text == "baseline") return RunMode::kBaseline;
  if (text == "tracking-only") return RunMode::kTrackingOnly;
  fail("sim.mode", "must be proposed, baseline or tracking-only");
}

double ScheduleSpec::value_mw(double t_s, double available_mw) const {
  if (kind == Kind::kFractionOfAvailable) return fraction * available_mw;
  double value = points_mw.empty() ? 0.0 : points_mw.front().second;
  for (const auto& [t, p] : points_mw) {
    if (t_s + 1e-9 >= t) value = p;
  }
  return value;
}

std::size_t ScenarioConfig::step_count() const {
  return static_cast<std::size_t>(std::llround(duration_s / dt_s));
}

void ScenarioConfig::validate() const {
  layout.validate();
  turbine.validate();
  frequency.params.validate();
  weights.validate();
  constraints.validate();
  if (horizon < 1) fail("mpc.horizon", "must be >= 1");
  if (filter_tau_s < 0.0) fail("mpc.filter_tau_s", "must be >= 0");
  for (int c = 0; c < 3; ++c) {
    if (mu(c) < 0.0 || mu(c) > 1.0) fail("mpc.mu", "entries must be in [0, 1]");
  }
  if (dt_s <= 0.0) fail("sim.dt_s", "must be positive");
  if (duration_s <= 0.0) fail("sim.duration_s", "must be positive");
  const double steps = duration_s / dt_s;
  if (std::abs(steps - std::llround(steps)) > 1e-9) {
    fail("sim.duration_s", "must be a multiple of dt_s");
  }
  if (solver_failure_budget < 0) fail("sim.solver_failure_budget", "must be >= 0");
  if (wind.mean_mps <= 0.0) fail("wind.mean_mps", "must be positive");
  if (wind.turbulence_intensity < 0.0) {
    fail("wind.turbulence_intensity", "must be >= 0");
  }
  if (wind.correlation_s <= 0.0) fail("wind.correlation_s", "must be positive");
  if (wind.source == TraceSource::kCsv && wind.csv_path.empty()) {
    fail("wind.csv_path", "required for csv source");
  }
  if (frequency.source == TraceSource::kCsv && frequency.csv_path.empty()) {
    fail("frequency.csv_path", "required for csv source");
  }
  if (schedule.kind == ScheduleSpec::Kind::kFractionOfAvailable) {
    if (schedule.fraction < 0.0 || schedule.fraction > 1.0) {
      fail("schedule.fraction", "must be in [0, 1]");
    }
  } else if (schedule.points_mw.empty()) {
    fail("schedule.points_mw", "must be non-empty");
  }
  if (solver.tol <= 0.0) fail("solver.tol", "must be positive");
  if (solver.max_iter < 1) fail("solver.max_iter", "must be >= 1");
  if (reference_advection_mps && *reference_advection_mps <= 0.0) {
    fail("farm.reference_advection_mps", "must be positive");
  }
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  check_keys(j,
             {"description", "farm", "turbine", "wind", "frequency", "weights",
              "mpc", "solver", "schedule", "sim"},
             "scenario");
  ScenarioConfig config;
  config.description = get_string(j, "description", "");

  if (!j.contains("farm")) fail("farm", "required");
  config.layout = parse_farm(j.at("farm"));
  if (j.at("farm").contains("reference_advection_mps") &&
      !j.at("farm").at("reference_advection_mps").is_null()) {
    config.reference_advection_mps =
        j.at("farm").at("reference_advection_mps").get<double>();
  }

  config.turbine = parse_turbine(j.contains("turbine") ? j.at("turbine")
                                                       : json::object());
  if (j.contains("turbine")) {
    config.ct_table_csv = get_string(j.at("turbine"), "ct_table_csv", "");
  }

  if (!j.contains("wind")) fail("wind", "required");
  {
    const json& w = j.at("wind");
    check_keys(w,
               {"source", "mean_mps", "turbulence_intensity", "seed",
                "correlation_s", "csv_path"},
               "wind");
    config.wind.source = parse_source(get_string(w, "source", "synthetic"),
                                      "wind.source");
    if (!w.contains("mean_mps") && config.wind.source != TraceSource::kCsv) {
      fail("wind.mean_mps", "required");
    }
    config.wind.mean_mps = get_number(w, "mean_mps", 9.0);
    config.wind.turbulence_intensity =
        get_number(w, "turbulence_intensity", 0.1);
    if (w.contains("seed")) {
      config.wind.seed = w.at("seed").get<std::uint64_t>();
    }
    config.wind.correlation_s = get_number(w, "correlation_s", 30.0);
    config.wind.csv_path = get_string(w, "csv_path", "");
  }

  {
    const json& f = j.contains("frequency") ? j.at("frequency") : json::object();
    check_keys(f,
               {"source", "nominal_hz", "constant_hz", "csv_path",
                "droop_mw_per_hz", "inertia_mws_per_hz", "derivative_filter_s"},
               "frequency");
    config.frequency.source =
        parse_source(get_string(f, "source", "synthetic"), "frequency.source");
    config.frequency.nominal_hz = get_number(f, "nominal_hz", 50.0);
    config.frequency.constant_hz =
        get_number(f, "constant_hz", config.frequency.nominal_hz);
    config.frequency.csv_path = get_string(f, "csv_path", "");
    config.frequency.params.droop_mw_per_hz =
        get_number(f, "droop_mw_per_hz", 50.0);
    config.frequency.params.inertia_mws_per_hz =
        get_number(f, "inertia_mws_per_hz", 10.0);
    config.frequency.params.derivative_filter_s =
        get_number(f, "derivative_filter_s", 1.0);
  }

  {
    const json& w = j.contains("weights") ? j.at("weights") : json::object();
    check_keys(w, {"q_scale", "r", "w", "s", "s2_scale"}, "weights");
    config.weights.q_scale = get_number(w, "q_scale", 1.0);
    config.weights.r = get_number(w, "r", 1e12);
    config.weights.w = get_number(w, "w", 1e3);
    config.weights.s = get_number(w, "s", 1.0);
    config.weights.s2_scale = get_number(w, "s2_scale", 1e-2);
  }

  {
    const json& m = j.contains("mpc") ? j.at("mpc") : json::object();
    check_keys(m, {"horizon", "filter_tau_s", "mu", "ct_min", "ct_max", "dct"},
               "mpc");
    config.horizon = get_int(m, "horizon", 10);
    config.filter_tau_s = get_number(m, "filter_tau_s", 5.0);
    if (m.contains("mu")) {
      const json& mu = m.at("mu");
      if (!mu.is_array() || mu.size() != 3) {
        fail("mpc.mu", "expected an array of 3 gains");
      }
      for (int c = 0; c < 3; ++c) config.mu(c) = mu[c].get<double>();
    }
    config.constraints.ct_min = get_number(m, "ct_min", 0.1);
    config.constraints.ct_max = get_number(m, "ct_max", 2.0);
    config.constraints.dct = get_number(m, "dct", 0.2);
  }
  // The analytic surface peak and the MPC upper bound describe the same
  // physical ceiling; keep them in lockstep.
  config.turbine.ct_max = config.constraints.ct_max;

  {
    const json& s = j.contains("solver") ? j.at("solver") : json::object();
    check_keys(s, {"tol", "max_iter", "polish", "adaptive_rho"}, "solver");
    config.solver.tol = get_number(s, "tol", 1e-6);
    config.solver.max_iter = get_int(s, "max_iter", 4000);
    config.solver.polish = get_bool(s, "polish", true);
    config.solver.adaptive_rho = get_bool(s, "adaptive_rho", true);
  }

  {
    const json& s = j.contains("schedule") ? j.at("schedule") : json::object();
    check_keys(s, {"type", "fraction", "points_mw"}, "schedule");
    const std::string type = get_string(s, "type", "fraction_of_available");
    if (type == "fraction_of_available") {
      config.schedule.kind = ScheduleSpec::Kind::kFractionOfAvailable;
      config.schedule.fraction = get_number(s, "fraction", 0.8);
    } else if (type == "points") {
      config.schedule.kind = ScheduleSpec::Kind::kPoints;
      if (!s.contains("points_mw") || !s.at("points_mw").is_array()) {
        fail("schedule.points_mw", "expected an array of [time_s, power_mw]");
      }
      for (const auto& p : s.at("points_mw")) {
        if (!p.is_array() || p.size() != 2) {
          fail("schedule.points_mw", "expected [time_s, power_mw] pairs");
        }
        config.schedule.points_mw.emplace_back(p[0].get<double>(),
                                               p[1].get<double>());
      }
    } else {
      fail("schedule.type", "must be fraction_of_available or points");
    }
  }

  {
    const json& s = j.contains("sim") ? j.at("sim") : json::object();
    check_keys(s,
               {"dt_s", "duration_s", "mode", "fidelity",
                "solver_failure_budget", "out_dir"},
               "sim");
    config.dt_s = get_number(s, "dt_s", 1.0);
    config.duration_s = get_number(s, "duration_s", 300.0);
    config.mode = run_mode_from_string(get_string(s, "mode", "proposed"));
    const std::string fidelity = get_string(s, "fidelity", "full");
    if (fidelity == "full") {
      config.fidelity = ServoFidelity::kFullServo;
    } else if (fidelity == "ideal-actuator") {
      config.fidelity = ServoFidelity::kIdealActuator;
    } else {
      fail("sim.fidelity", "must be full or ideal-actuator");
    }
    config.solver_failure_budget = get_int(s, "solver_failure_budget", 0);
    config.out_dir = get_string(s, "out_dir", "");
  }

  config.validate();
  return config;
}

json ScenarioConfig::to_json() const {
  json j;
  if (!description.empty()) j["description"] = description;
  json positions = json::array();
  for (const auto& p : layout.positions_m) {
    positions.push_back({p.x(), p.y()});
  }
  j["farm"] = {
      {"layout", {{"type", "positions"}, {"positions_m", positions}}},
      {"rotor_diameter_m", layout.rotor_diameter_m},
      {"wind_direction_deg", layout.wind_direction_deg},
      {"wake_decay", layout.wake_decay},
      {"advection_smoothing_s", layout.advection_smoothing_s},
  };
  if (reference_advection_mps) {
    j["farm"]["reference_advection_mps"] = *reference_advection_mps;
  }
  j["turbine"] = {
      {"air_density", turbine.air_density},
      {"rotor_radius_m", turbine.rotor_radius_m},
      {"inertia_kgm2", turbine.inertia_kgm2},
      {"gearbox_ratio", turbine.gearbox_ratio},
      {"torque_kp", turbine.torque_kp},
      {"torque_ki", turbine.torque_ki},
      {"converter_tau_s", turbine.converter_tau_s},
      {"gen_torque_max_nm", turbine.gen_torque_max_nm},
      {"pitch_kp", turbine.pitch_kp},
      {"pitch_ki", turbine.pitch_ki},
      {"pitch_rate_limit_deg_s", turbine.pitch_rate_limit_deg_s},
      {"pitch_max_deg", turbine.pitch_max_deg},
      {"rated_power_w", turbine.rated_power_w},
      {"rotor_speed_min_rads", turbine.rotor_speed_min_rads},
      {"rotor_speed_max_rads", turbine.rotor_speed_max_rads},
      {"lambda_star", turbine.lambda_star},
      {"beta_sensitivity", turbine.beta_sensitivity},
      {"servo_substeps", turbine.servo_substeps},
  };
  if (!ct_table_csv.empty()) j["turbine"]["ct_table_csv"] = ct_table_csv;
  j["wind"] = {
      {"source", source_name(wind.source)},
      {"mean_mps", wind.mean_mps},
      {"turbulence_intensity", wind.turbulence_intensity},
      {"seed", wind.seed},
      {"correlation_s", wind.correlation_s},
  };
  if (!wind.csv_path.empty()) j["wind"]["csv_path"] = wind.csv_path;
  j["frequency"] = {
      {"source", source_name(frequency.source)},
      {"nominal_hz", frequency.nominal_hz},
      {"constant_hz", frequency.constant_hz},
      {"droop_mw_per_hz", frequency.params.droop_mw_per_hz},
      {"inertia_mws_per_hz", frequency.params.inertia_mws_per_hz},
      {"derivative_filter_s", frequency.params.derivative_filter_s},
  };
  if (!frequency.csv_path.empty()) j["frequency"]["csv_path"] = frequency.csv_path;
  j["weights"] = {
      {"q_scale", weights.q_scale}, {"r", weights.r},      {"w", weights.w},
      {"s", weights.s},             {"s2_scale", weights.s2_scale},
  };
  j["mpc"] = {
      {"horizon", horizon},
      {"filter_tau_s", filter_tau_s},
      {"mu", {mu(0), mu(1), mu(2)}},
      {"ct_min", constraints.ct_min},
      {"ct_max", constraints.ct_max},
      {"dct", constraints.dct},
  };
  j["solver"] = {
      {"tol", solver.tol},
      {"max_iter", solver.max_iter},
      {"polish", solver.polish},
      {"adaptive_rho", solver.adaptive_rho},
  };
  if (schedule.kind == ScheduleSpec::Kind::kFractionOfAvailable) {
    j["schedule"] = {{"type", "fraction_of_available"},
                     {"fraction", schedule.fraction}};
  } else {
    json points = json::array();
    for (const auto& [t, p] : schedule.points_mw) points.push_back({t, p});
    j["schedule"] = {{"type", "points"}, {"points_mw", points}};
  }
  j["sim"] = {
      {"dt_s", dt_s},
      {"duration_s", duration_s},
      {"mode", to_string(mode)},
      {"fidelity",
       fidelity == ServoFidelity::kFullServo ? "full" : "ideal-actuator"},
      {"solver_failure_budget", solver_failure_budget},
  };
  if (!out_dir.empty()) j["sim"]["out_dir"] = out_dir;
  return j;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("scenario: cannot open " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("scenario: parse error in " + path.string() +
                             ": " + e.what());
  }
  ScenarioConfig config = ScenarioConfig::from_json(j);
  // Relative trace/table paths resolve against the scenario file.
  const auto resolve = [&](std::string* p) {
    if (p->empty()) return;
    std::filesystem::path fp(*p);
    if (fp.is_relative()) *p = (path.parent_path() / fp).string();
  };
  resolve(&config.wind.csv_path);
  resolve(&config.frequency.csv_path);
  resolve(&config.ct_table_csv);
  return config;
}

void save_scenario(const std::filesystem::path& path,
                   const ScenarioConfig& config) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("scenario: cannot write " + path.string());
  }
  out << config.to_json().dump(2) << '\n';
}

}  // namespace wfmpc
