// Fatigue and tracking evaluation criteria computed on realized simulation
// series: per-turbine dynamic fatigue dF, cross-farm load deviation eF, and
// the RMS power-tracking error, plus normalization against a baseline run.
#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

namespace wfmpc::metrics {

struct FatigueReport {
  std::vector<double> df_per_turbine;  // N, newtons
  std::vector<double> ef_per_turbine;  // N, newtons
  double df_total = 0.0;               // sum over turbines
  double ef_total = 0.0;
  double rms_tracking_error_w = 0.0;
  std::size_t sample_count = 0;
  // Present only after normalize() against a baseline report.
  std::optional<double> df_normalized;
  std::optional<double> ef_normalized;
};

// Dynamic fatigue: df_i = sqrt(sum_{t=1..T-1} (F_i(t) - F_i(t-1))^2 / T).
// `force` is T x N (rows are time samples). Requires T >= 2.
std::pair<std::vector<double>, double> dynamic_fatigue(
    const Eigen::MatrixXd& force);

// Load deviation from the cross-turbine mean:
// ef_i = sqrt(sum_t (F_i(t) - F_mean(t))^2 / T). Requires T >= 1, N >= 2.
std::pair<std::vector<double>, double> equalization(
    const Eigen::MatrixXd& force);

double rms_error(const std::vector<double>& p_total,
                 const std::vector<double>& p_ref);

FatigueReport evaluate(const Eigen::MatrixXd& force,
                       const std::vector<double>& p_total,
                       const std::vector<double>& p_ref);

// Fills df_normalized/ef_normalized as ratios to the baseline totals.
// Throws on degenerate (zero) baseline values instead of producing inf.
void normalize(FatigueReport& report, const FatigueReport& baseline);

}  // namespace wfmpc::metrics
