// Scenario ingestion: a JSON experiment description covering farm layout,
// turbine and controller parameters, traces, weights and the run protocol.
// Loading fills every default and validates invariants; the resolved config
// can be echoed back out and re-parsed to the identical configuration.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wfmpc/freq_control.hpp"
#include "wfmpc/mpc.hpp"
#include "wfmpc/turbine.hpp"
#include "wfmpc/wind_field.hpp"

namespace wfmpc {

enum class RunMode { kProposed, kBaseline, kTrackingOnly };
enum class TraceSource { kSynthetic, kConstant, kCsv };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& text);

struct WindSpec {
  TraceSource source = TraceSource::kSynthetic;
  double mean_mps = 9.0;
  double turbulence_intensity = 0.1;
  std::uint64_t seed = 1;
  double correlation_s = 30.0;
  std::string csv_path;
};

struct FrequencySpec {
  TraceSource source = TraceSource::kSynthetic;
  double nominal_hz = 50.0;
  double constant_hz = 50.0;
  std::string csv_path;
  FreqCtrlParams params;
};

struct ScheduleSpec {
  enum class Kind { kFractionOfAvailable, kPoints };
  Kind kind = Kind::kFractionOfAvailable;
  double fraction = 0.8;
  // Piecewise-constant (time_s, power_mw) pairs, times ascending from 0.
  std::vector<std::pair<double, double>> points_mw;

  // Piecewise-constant lookup; available_mw resolves the fraction form.
  double value_mw(double t_s, double available_mw) const;
};

struct ScenarioConfig {
  std::string description;
  FarmLayout layout;
  std::optional<double> reference_advection_mps;  // default: wind mean
  TurbineParams turbine;
  std::string ct_table_csv;
  WindSpec wind;
  FrequencySpec frequency;
  MpcWeights weights;
  ConstraintSpec constraints;
  int horizon = 10;
  double filter_tau_s = 5.0;
  Eigen::Vector3d mu{0.5, 0.5, 0.5};
  QpSettings solver;
  ScheduleSpec schedule;
  double dt_s = 1.0;
  double duration_s = 300.0;
  RunMode mode = RunMode::kProposed;
  ServoFidelity fidelity = ServoFidelity::kFullServo;
  int solver_failure_budget = 0;
  std::string out_dir;

  std::size_t step_count() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);
};

ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path,
                   const ScenarioConfig& config);

}  // namespace wfmpc
