#include "wfmpc/simulation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "wfmpc/csv.hpp"

namespace wfmpc {

namespace {

constexpr double kWattPerMw = 1e6;

FreestreamTrace make_wind_trace(const ScenarioConfig& config) {
  const std::size_t steps = config.step_count();
  if (config.wind.source == TraceSource::kCsv) {
    FreestreamTrace trace = FreestreamTrace::from_csv(config.wind.csv_path);
    if (std::abs(trace.dt_s - config.dt_s) > 1e-9 * config.dt_s) {
      throw std::runtime_error("wind trace: sample interval differs from sim dt");
    }
    if (trace.samples_mps.size() < steps) {
      throw std::runtime_error("wind trace: shorter than the simulation");
    }
    trace.samples_mps.resize(steps);
    return trace;
  }
  const double sigma = config.wind.source == TraceSource::kConstant
                           ? 0.0
                           : config.wind.turbulence_intensity;
  return synth_freestream(config.wind.mean_mps, sigma, config.wind.seed,
                          config.duration_s, config.dt_s,
                          config.wind.correlation_s);
}

FrequencyTrace make_frequency_trace(const ScenarioConfig& config) {
  const std::size_t steps = config.step_count();
  switch (config.frequency.source) {
    case TraceSource::kCsv: {
      FrequencyTrace trace = FrequencyTrace::from_csv(
          config.frequency.csv_path, config.frequency.nominal_hz);
      if (std::abs(trace.dt_s - config.dt_s) > 1e-9 * config.dt_s) {
        throw std::runtime_error(
            "frequency trace: sample interval differs from sim dt");
      }
      if (trace.samples_hz.size() < steps) {
        throw std::runtime_error("frequency trace: shorter than the simulation");
      }
      trace.samples_hz.resize(steps);
      return trace;
    }
    case TraceSource::kConstant:
      return FrequencyTrace::constant(config.frequency.constant_hz,
                                      config.frequency.nominal_hz, steps,
                                      config.dt_s);
    case TraceSource::kSynthetic:
    default:
      return FrequencyTrace::synthetic_excursion(config.frequency.nominal_hz,
                                                 steps, config.dt_s);
  }
}

// Farm power with every turbine at the coefficient ceiling and the wake
// field settled, in MW.
double greedy_available_mw(const ScenarioConfig& config, double mean_mps) {
  const std::size_t n = config.layout.turbine_count();
  const std::vector<double> ct_max(n, config.constraints.ct_max);
  const auto speeds = jensen_steady_speeds(config.layout, ct_max, mean_mps);
  double total = 0.0;
  for (double u : speeds) {
    total += power(config.constraints.ct_max, u, config.turbine);
  }
  return total / kWattPerMw;
}

// Uniform coefficient whose settled farm power meets the target; the farm
// total is monotone in the shared coefficient over the admissible range.
double uniform_ct_for_power(const ScenarioConfig& config, double target_w,
                            double mean_mps) {
  const std::size_t n = config.layout.turbine_count();
  const auto farm_power = [&](double c) {
    const std::vector<double> ct(n, c);
    const auto speeds = jensen_steady_speeds(config.layout, ct, mean_mps);
    double total = 0.0;
    for (double u : speeds) total += power(c, u, config.turbine);
    return total;
  };
  double lo = config.constraints.ct_min;
  double hi = config.constraints.ct_max;
  if (farm_power(lo) >= target_w) return lo;
  if (farm_power(hi) <= target_w) return hi;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (farm_power(mid) < target_w) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

MpcConfig controller_config(const ScenarioConfig& config) {
  MpcConfig mpc;
  mpc.weights = config.weights;
  mpc.constraints = config.constraints;
  mpc.horizon = config.horizon;
  mpc.dt_s = config.dt_s;
  mpc.filter_tau_s = config.filter_tau_s;
  mpc.mu = config.mu;
  mpc.half_rho_area = 0.5 * config.turbine.air_density *
                      config.turbine.rotor_area_m2;
  mpc.solver = config.solver;
  switch (config.mode) {
    case RunMode::kProposed:
      mpc.kind = ObjectiveKind::kProposed;
      break;
    case RunMode::kBaseline:
      mpc.kind = ObjectiveKind::kBaseline;
      break;
    case RunMode::kTrackingOnly:
      mpc.kind = ObjectiveKind::kProposed;
      mpc.weights.w = 0.0;
      break;
  }
  return mpc;
}

}  // namespace

ResultsBundle run(const ScenarioConfig& config) {
  config.validate();
  ScenarioConfig resolved = config;
  if (!resolved.ct_table_csv.empty() && !resolved.turbine.ct_table) {
    resolved.turbine.ct_table = std::make_shared<const CtTable>(
        CtTable::from_csv(resolved.ct_table_csv));
  }

  const std::size_t steps = resolved.step_count();
  const std::size_t n = resolved.layout.turbine_count();
  const FreestreamTrace wind = make_wind_trace(resolved);
  const FrequencyTrace frequency = make_frequency_trace(resolved);

  ResultsBundle bundle;
  bundle.config = resolved;
  bundle.available_power_mw = greedy_available_mw(resolved, wind.mean_mps);

  // Stabilized start: a uniform coefficient meeting the initial reference,
  // settled wake field, turbines at their matching equilibria.
  const double p_cmd0_mw =
      resolved.schedule.value_mw(0.0, bundle.available_power_mw);
  const double delta_f0 = resolved.frequency.nominal_hz - frequency.samples_hz[0];
  const double p_ref0_mw = std::max(
      p_cmd0_mw + resolved.frequency.params.droop_mw_per_hz * delta_f0, 0.0);
  const double ct0 =
      uniform_ct_for_power(resolved, p_ref0_mw * kWattPerMw, wind.mean_mps);

  std::vector<double> realized_ct(n, ct0);
  FlowField flow(resolved.layout, resolved.dt_s,
                 resolved.reference_advection_mps.value_or(wind.mean_mps));
  flow.reset(realized_ct, wind.mean_mps);

  std::vector<TurbineState> states(n);
  {
    const auto speeds = flow.speeds();
    for (std::size_t i = 0; i < n; ++i) {
      states[i] = equilibrium_state(power(ct0, speeds[i], resolved.turbine),
                                    speeds[i], resolved.turbine);
    }
  }

  MpcController controller(controller_config(resolved));
  controller.reset(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), ct0));
  FrequencyController freq_ctrl(resolved.frequency.params,
                                resolved.frequency.nominal_hz);

  bundle.power_w.resize(steps, n);
  bundle.thrust_n.resize(steps, n);
  bundle.ct.resize(steps, n);
  bundle.wind_mps.resize(steps, n);
  bundle.p_total_w.reserve(steps);
  bundle.p_ref_w.reserve(steps);
  bundle.p_command_w.reserve(steps);
  bundle.freestream_mps.reserve(steps);
  bundle.frequency_hz.reserve(steps);
  bundle.solver_log.reserve(steps);

  int failures = 0;
  std::size_t completed = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double u_inf = wind.samples_mps[t];
    const auto& speeds = flow.step(realized_ct, u_inf);

    std::vector<TurbineFeedback> feedback(n);
    for (std::size_t i = 0; i < n; ++i) {
      feedback[i] = {states[i].thrust_n, states[i].power_w, states[i].ct_prime};
    }

    const double t_s = static_cast<double>(t) * resolved.dt_s;
    const double p_cmd_mw =
        resolved.schedule.value_mw(t_s, bundle.available_power_mw);
    const double p_ref_mw =
        freq_ctrl.step(p_cmd_mw, frequency.samples_hz[t], resolved.dt_s);

    const Eigen::VectorXd p_ref_horizon = Eigen::VectorXd::Constant(
        resolved.horizon, p_ref_mw * kWattPerMw);
    const MpcStepResult result =
        controller.step(feedback, speeds, p_ref_horizon);

    StepDiagnostics diag;
    diag.iterations = result.solution.iterations;
    diag.status = result.solution.status;
    diag.polished = result.solution.polished;
    diag.residuals = result.solution.residuals;
    diag.objective = result.solution.objective + result.objective_offset;
    bundle.solver_log.push_back(diag);

    if (result.solution.status != QpStatus::kSolved) {
      ++failures;
      if (failures > resolved.solver_failure_budget) {
        bundle.aborted = true;
        bundle.abort_reason =
            "solver failed to converge at step " + std::to_string(t) +
            " (residual " +
            csv::format_double(result.solution.residuals.max()) + ")";
      }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      states[i] = step_servo(states[i], result.power_commands_w(
                                            static_cast<Eigen::Index>(i)),
                             speeds[i], resolved.dt_s, resolved.turbine,
                             resolved.fidelity);
      realized_ct[i] = states[i].ct_prime;
      bundle.power_w(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          states[i].power_w;
      bundle.thrust_n(static_cast<Eigen::Index>(t),
                      static_cast<Eigen::Index>(i)) = states[i].thrust_n;
      bundle.ct(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          states[i].ct_prime;
      bundle.wind_mps(static_cast<Eigen::Index>(t),
                      static_cast<Eigen::Index>(i)) = speeds[i];
      total += states[i].power_w;
    }
    bundle.p_total_w.push_back(total);
    bundle.p_ref_w.push_back(p_ref_mw * kWattPerMw);
    bundle.p_command_w.push_back(p_cmd_mw * kWattPerMw);
    bundle.freestream_mps.push_back(u_inf);
    bundle.frequency_hz.push_back(frequency.samples_hz[t]);
    completed = t + 1;
    if (bundle.aborted) break;
  }

  if (completed < steps) {
    bundle.power_w.conservativeResize(completed, Eigen::NoChange);
    bundle.thrust_n.conservativeResize(completed, Eigen::NoChange);
    bundle.ct.conservativeResize(completed, Eigen::NoChange);
    bundle.wind_mps.conservativeResize(completed, Eigen::NoChange);
  }

  if (completed >= 2) {
    auto [df_i, df] = metrics::dynamic_fatigue(bundle.thrust_n);
    bundle.report.df_per_turbine = std::move(df_i);
    bundle.report.df_total = df;
    if (n >= 2) {
      auto [ef_i, ef] = metrics::equalization(bundle.thrust_n);
      bundle.report.ef_per_turbine = std::move(ef_i);
      bundle.report.ef_total = ef;
    } else {
      bundle.report.ef_per_turbine.assign(1, 0.0);
      bundle.report.ef_total = 0.0;
    }
    bundle.report.rms_tracking_error_w =
        metrics::rms_error(bundle.p_total_w, bundle.p_ref_w);
    bundle.report.sample_count = completed;
  }
  return bundle;
}

const SweepCell* SweepTable::find(double w, double s) const {
  for (const auto& cell : cells) {
    if (cell.w == w && cell.s == s) return &cell;
  }
  return nullptr;
}

SweepTable sweep(const ScenarioConfig& config,
                 const std::vector<std::pair<double, double>>& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  SweepTable table;
  double base_df = 0.0, base_ef = 0.0;
  bool have_base = false;
  for (const auto& [w, s] : grid) {
    ScenarioConfig cell_config = config;
    cell_config.weights.w = w;
    cell_config.weights.s = s;
    const ResultsBundle bundle = run(cell_config);
    if (bundle.aborted) {
      throw std::runtime_error("sweep: aborted cell (w=" +
                               csv::format_double(w) + ", s=" +
                               csv::format_double(s) + "): " +
                               bundle.abort_reason);
    }
    SweepCell cell;
    cell.w = w;
    cell.s = s;
    cell.rms_tracking_error_w = bundle.report.rms_tracking_error_w;
    cell.df_total = bundle.report.df_total;
    cell.ef_total = bundle.report.ef_total;
    cell.solve_count = bundle.solver_log.size();
    cell.all_solved = true;
    for (const auto& diag : bundle.solver_log) {
      cell.worst_residual = std::max(cell.worst_residual, diag.residuals.max());
      if (diag.status != QpStatus::kSolved) cell.all_solved = false;
    }
    if (!have_base && w == 0.0) {
      base_df = cell.df_total;
      base_ef = cell.ef_total;
      have_base = true;
    }
    table.cells.push_back(cell);
  }
  if (have_base && base_df > 0.0 && base_ef > 0.0) {
    for (auto& cell : table.cells) {
      cell.df_normalized = cell.df_total / base_df;
      cell.ef_normalized = cell.ef_total / base_ef;
      cell.normalized = true;
    }
  }
  return table;
}

namespace {

std::vector<std::string> turbine_headers(const std::string& prefix,
                                         std::size_t n) {
  std::vector<std::string> headers;
  headers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    headers.push_back(prefix + "_" + std::to_string(i + 1));
  }
  return headers;
}

}  // namespace

void write_outputs(const ResultsBundle& bundle,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec && !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("write_outputs: cannot create " + dir.string());
  }
  const std::size_t steps = bundle.step_count();
  const std::size_t n = static_cast<std::size_t>(bundle.power_w.cols());
  const double dt = bundle.config.dt_s;

  const auto time_of = [&](std::size_t t) { return static_cast<double>(t) * dt; };

  {
    std::vector<std::string> header{"t_s", "p_ref_w", "p_total_w"};
    const auto cols = turbine_headers("p", n);
    header.insert(header.end(), cols.begin(), cols.end());
    std::vector<std::vector<double>> rows(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      auto& row = rows[t];
      row.reserve(n + 3);
      row.push_back(time_of(t));
      row.push_back(bundle.p_ref_w[t]);
      row.push_back(bundle.p_total_w[t]);
      for (std::size_t i = 0; i < n; ++i) {
        row.push_back(bundle.power_w(static_cast<Eigen::Index>(t),
                                     static_cast<Eigen::Index>(i)));
      }
    }
    csv::write_table(dir / "power.csv", header, rows);
  }

  const auto write_matrix = [&](const char* name, const char* prefix,
                                const Eigen::MatrixXd& matrix) {
    std::vector<std::string> header{"t_s"};
    const auto cols = turbine_headers(prefix, n);
    header.insert(header.end(), cols.begin(), cols.end());
    std::vector<std::vector<double>> rows(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      auto& row = rows[t];
      row.reserve(n + 1);
      row.push_back(time_of(t));
      for (std::size_t i = 0; i < n; ++i) {
        row.push_back(matrix(static_cast<Eigen::Index>(t),
                             static_cast<Eigen::Index>(i)));
      }
    }
    csv::write_table(dir / name, header, rows);
  };
  write_matrix("loads.csv", "f", bundle.thrust_n);
  write_matrix("ct.csv", "ct", bundle.ct);

  {
    std::vector<std::string> header{"t_s", "u_inf_mps"};
    const auto cols = turbine_headers("u", n);
    header.insert(header.end(), cols.begin(), cols.end());
    std::vector<std::vector<double>> rows(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      auto& row = rows[t];
      row.reserve(n + 2);
      row.push_back(time_of(t));
      row.push_back(bundle.freestream_mps[t]);
      for (std::size_t i = 0; i < n; ++i) {
        row.push_back(bundle.wind_mps(static_cast<Eigen::Index>(t),
                                      static_cast<Eigen::Index>(i)));
      }
    }
    csv::write_table(dir / "wind.csv", header, rows);
  }

  {
    std::vector<std::string> header{"t_s",        "iterations",
                                    "status",     "polished",
                                    "stationarity", "primal",
                                    "dual",       "complementarity",
                                    "objective"};
    std::vector<std::vector<double>> rows(bundle.solver_log.size());
    for (std::size_t t = 0; t < bundle.solver_log.size(); ++t) {
      const auto& d = bundle.solver_log[t];
      rows[t] = {time_of(t),
                 static_cast<double>(d.iterations),
                 static_cast<double>(static_cast<int>(d.status)),
                 d.polished ? 1.0 : 0.0,
                 d.residuals.stationarity,
                 d.residuals.primal,
                 d.residuals.dual,
                 d.residuals.complementarity,
                 d.objective};
    }
    csv::write_table(dir / "solver.csv", header, rows);
  }

  {
    nlohmann::json j;
    j["sample_count"] = bundle.report.sample_count;
    j["df_total_n"] = bundle.report.df_total;
    j["ef_total_n"] = bundle.report.ef_total;
    j["rms_tracking_error_w"] = bundle.report.rms_tracking_error_w;
    j["df_per_turbine_n"] = bundle.report.df_per_turbine;
    j["ef_per_turbine_n"] = bundle.report.ef_per_turbine;
    if (bundle.report.df_normalized) {
      j["df_normalized"] = *bundle.report.df_normalized;
    }
    if (bundle.report.ef_normalized) {
      j["ef_normalized"] = *bundle.report.ef_normalized;
    }
    j["available_power_mw"] = bundle.available_power_mw;
    j["aborted"] = bundle.aborted;
    if (bundle.aborted) j["abort_reason"] = bundle.abort_reason;
    std::ofstream out(dir / "metrics.json");
    if (!out) throw std::runtime_error("write_outputs: cannot write metrics.json");
    out << j.dump(2) << '\n';
  }

  {
    std::ofstream out(dir / "config_echo.json");
    if (!out) {
      throw std::runtime_error("write_outputs: cannot write config_echo.json");
    }
    out << bundle.config.to_json().dump(2) << '\n';
  }
}

void write_sweep(const SweepTable& table, const std::filesystem::path& path) {
  std::vector<std::string> header{"w",  "s",       "rms_tracking_error_w",
                                  "df", "ef",      "df_normalized",
                                  "ef_normalized"};
  std::vector<std::vector<double>> rows;
  rows.reserve(table.cells.size());
  for (const auto& cell : table.cells) {
    rows.push_back({cell.w, cell.s, cell.rms_tracking_error_w, cell.df_total,
                    cell.ef_total,
                    cell.normalized ? cell.df_normalized
                                    : std::numeric_limits<double>::quiet_NaN(),
                    cell.normalized ? cell.ef_normalized
                                    : std::numeric_limits<double>::quiet_NaN()});
  }
  csv::write_table(path, header, rows);
}

}  // namespace wfmpc
