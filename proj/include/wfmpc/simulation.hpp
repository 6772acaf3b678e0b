// Closed-loop orchestration: per sample the harness steps the wake field
// with the last realized coefficients, reads the turbine feedback, forms the
// farm power reference from the dispatch command and measured frequency,
// solves the receding-horizon problem, dispatches the first-step commands
// and advances every turbine servo. Also the (w, s) sweep protocol and the
// CSV/JSON output writer.
#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "wfmpc/metrics.hpp"
#include "wfmpc/mpc.hpp"
#include "wfmpc/scenario.hpp"

namespace wfmpc {

struct StepDiagnostics {
  int iterations = 0;
  QpStatus status = QpStatus::kMaxIterations;
  bool polished = false;
  QpResiduals residuals;
  double objective = 0.0;  // QP value plus offset, MW^2-scaled convention
};

struct ResultsBundle {
  ScenarioConfig config;  // resolved echo, every default filled

  // Time-indexed series, one row per control step.
  Eigen::MatrixXd power_w;    // T x N realized
  Eigen::MatrixXd thrust_n;   // T x N realized
  Eigen::MatrixXd ct;         // T x N realized coefficients
  Eigen::MatrixXd wind_mps;   // T x N rotor-effective speeds
  std::vector<double> p_total_w;
  std::vector<double> p_ref_w;
  std::vector<double> p_command_w;
  std::vector<double> freestream_mps;
  std::vector<double> frequency_hz;
  std::vector<StepDiagnostics> solver_log;

  metrics::FatigueReport report;
  double available_power_mw = 0.0;  // greedy steady farm power at mean wind
  bool aborted = false;
  std::string abort_reason;

  std::size_t step_count() const { return p_total_w.size(); }
};

ResultsBundle run(const ScenarioConfig& config);

struct SweepCell {
  double w = 0.0;
  double s = 1.0;
  double rms_tracking_error_w = 0.0;
  double df_total = 0.0;
  double ef_total = 0.0;
  double df_normalized = 0.0;  // against the (w = 0) cell when present
  double ef_normalized = 0.0;
  bool normalized = false;
  // Solver certification over the cell's run.
  std::size_t solve_count = 0;
  double worst_residual = 0.0;
  bool all_solved = false;
};

struct SweepTable {
  std::vector<SweepCell> cells;

  const SweepCell* find(double w, double s) const;
};

// One run per (w, s) cell, sharing wind and frequency seeds; cells with a
// w = 0 entry in the grid provide the normalization base.
SweepTable sweep(const ScenarioConfig& config,
                 const std::vector<std::pair<double, double>>& grid);

// power.csv, loads.csv, ct.csv, wind.csv, solver.csv, metrics.json and
// config_echo.json under dir (created if missing).
void write_outputs(const ResultsBundle& bundle,
                   const std::filesystem::path& dir);

void write_sweep(const SweepTable& table, const std::filesystem::path& path);

}  // namespace wfmpc
