#include "wfmpc/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace wfmpc::metrics {

std::pair<std::vector<double>, double> dynamic_fatigue(
    const Eigen::MatrixXd& force) {
  const auto t_count = force.rows();
  const auto n = force.cols();
  if (t_count < 2) {
    throw std::invalid_argument("dynamic_fatigue: need at least 2 samples");
  }
  std::vector<double> per_turbine(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index t = 1; t < t_count; ++t) {
      const double d = force(t, i) - force(t - 1, i);
      acc += d * d;
    }
    const double df = std::sqrt(acc / static_cast<double>(t_count));
    per_turbine[static_cast<std::size_t>(i)] = df;
    total += df;
  }
  return {per_turbine, total};
}

std::pair<std::vector<double>, double> equalization(
    const Eigen::MatrixXd& force) {
  const auto t_count = force.rows();
  const auto n = force.cols();
  if (t_count < 1) throw std::invalid_argument("equalization: empty series");
  if (n < 2) {
    throw std::invalid_argument("equalization: need at least 2 turbines");
  }
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    double mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mean += force(t, i);
    mean /= static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = force(t, i) - mean;
      acc[static_cast<std::size_t>(i)] += d * d;
    }
  }
  std::vector<double> per_turbine(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < per_turbine.size(); ++i) {
    per_turbine[i] = std::sqrt(acc[i] / static_cast<double>(t_count));
    total += per_turbine[i];
  }
  return {per_turbine, total};
}

double rms_error(const std::vector<double>& p_total,
                 const std::vector<double>& p_ref) {
  if (p_total.size() != p_ref.size()) {
    throw std::invalid_argument("rms_error: series length mismatch");
  }
  if (p_total.empty()) throw std::invalid_argument("rms_error: empty series");
  double acc = 0.0;
  for (std::size_t t = 0; t < p_total.size(); ++t) {
    const double d = p_total[t] - p_ref[t];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(p_total.size()));
}

FatigueReport evaluate(const Eigen::MatrixXd& force,
                       const std::vector<double>& p_total,
                       const std::vector<double>& p_ref) {
  FatigueReport report;
  auto [df_i, df] = dynamic_fatigue(force);
  auto [ef_i, ef] = equalization(force);
  report.df_per_turbine = std::move(df_i);
  report.ef_per_turbine = std::move(ef_i);
  report.df_total = df;
  report.ef_total = ef;
  report.rms_tracking_error_w = rms_error(p_total, p_ref);
  report.sample_count = static_cast<std::size_t>(force.rows());
  return report;
}

void normalize(FatigueReport& report, const FatigueReport& baseline) {
  if (report.df_per_turbine.size() != baseline.df_per_turbine.size()) {
    throw std::invalid_argument("normalize: farm shape mismatch");
  }
  if (baseline.df_total <= 0.0 || baseline.ef_total <= 0.0) {
    throw std::invalid_argument("normalize: degenerate baseline (zero totals)");
  }
  report.df_normalized = report.df_total / baseline.df_total;
  report.ef_normalized = report.ef_total / baseline.ef_total;
}

}  // namespace wfmpc::metrics
