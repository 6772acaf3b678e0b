#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wfmpc/metrics.hpp"
#include "wfmpc/csv.hpp"
#include "wfmpc/simulation.hpp"

using wfmpc::ResultsBundle;
using wfmpc::RunMode;
using wfmpc::ScenarioConfig;
using wfmpc::ScheduleSpec;
using wfmpc::TraceSource;

namespace {

ScenarioConfig small_config(std::size_t turbines, double duration_s) {
  ScenarioConfig config;
  config.layout = wfmpc::FarmLayout::column(turbines, 5.0, 126.0);
  config.wind.mean_mps = 9.0;
  config.wind.turbulence_intensity = 0.1;
  config.wind.seed = 3;
  config.duration_s = duration_s;
  config.weights.w = 1e3;
  config.weights.s = 1.0;
  config.validate();
  return config;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("single turbine with steady wind tracks the reference closely") {
  ScenarioConfig config = small_config(1, 120.0);
  config.wind.turbulence_intensity = 0.0;
  config.schedule.kind = ScheduleSpec::Kind::kFractionOfAvailable;
  config.schedule.fraction = 0.5;
  config.frequency.source = TraceSource::kConstant;
  config.weights.w = 0.0;
  // 50% of a single turbine's available power exceeds the default rating;
  // give the machine headroom so the rating clamp stays out of the loop.
  config.turbine.rated_power_w = 2.0e7;

  const ResultsBundle bundle = wfmpc::run(config);
  REQUIRE_FALSE(bundle.aborted);
  const std::size_t t_end = bundle.step_count() - 1;
  // After the transient the steady tracking error stays below 0.5%.
  for (std::size_t t = t_end - 20; t <= t_end; ++t) {
    CHECK(std::abs(bundle.p_total_w[t] - bundle.p_ref_w[t]) <=
          0.005 * bundle.p_ref_w[t]);
  }
}

TEST_CASE("identical config and seed produce bit-identical outputs") {
  ScenarioConfig config = small_config(3, 60.0);
  const ResultsBundle a = wfmpc::run(config);
  const ResultsBundle b = wfmpc::run(config);
  REQUIRE(a.step_count() == b.step_count());
  CHECK((a.power_w - b.power_w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.thrust_n - b.thrust_n).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.ct - b.ct).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t t = 0; t < a.step_count(); ++t) {
    CHECK(a.p_total_w[t] == b.p_total_w[t]);
    CHECK(a.p_ref_w[t] == b.p_ref_w[t]);
  }

  const auto dir_a = std::filesystem::temp_directory_path() / "wfmpc_run_a";
  const auto dir_b = std::filesystem::temp_directory_path() / "wfmpc_run_b";
  wfmpc::write_outputs(a, dir_a);
  wfmpc::write_outputs(b, dir_b);
  for (const char* name :
       {"power.csv", "loads.csv", "ct.csv", "wind.csv", "metrics.json"}) {
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  }
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("baseline mode equals proposed mode with s = 1 and the rate term dropped") {
  ScenarioConfig proposed = small_config(2, 60.0);
  proposed.mode = RunMode::kProposed;
  proposed.weights.w = 500.0;
  proposed.weights.s = 1.0;
  proposed.weights.drop_rate_term = true;

  ScenarioConfig baseline = proposed;
  baseline.mode = RunMode::kBaseline;

  const ResultsBundle a = wfmpc::run(proposed);
  const ResultsBundle b = wfmpc::run(baseline);
  REQUIRE_FALSE(a.aborted);
  REQUIRE_FALSE(b.aborted);
  // Same dispatch trajectory within solver tolerance, which compounds only
  // weakly over the run.
  const double scale = b.power_w.cwiseAbs().maxCoeff();
  CHECK((a.power_w - b.power_w).cwiseAbs().maxCoeff() <= 1e-4 * scale);
}

TEST_CASE("seed isolation: weights do not influence the traces") {
  ScenarioConfig a_config = small_config(2, 40.0);
  a_config.weights.w = 0.0;
  ScenarioConfig b_config = a_config;
  b_config.weights.w = 1e3;
  b_config.weights.s = 0.5;

  const ResultsBundle a = wfmpc::run(a_config);
  const ResultsBundle b = wfmpc::run(b_config);
  for (std::size_t t = 0; t < a.step_count(); ++t) {
    CHECK(a.freestream_mps[t] == b.freestream_mps[t]);
    CHECK(a.frequency_hz[t] == b.frequency_hz[t]);
  }
}

TEST_CASE("energy accounting and solve bookkeeping") {
  ScenarioConfig config = small_config(3, 50.0);
  const ResultsBundle bundle = wfmpc::run(config);
  REQUIRE_FALSE(bundle.aborted);
  CHECK(bundle.solver_log.size() == bundle.step_count());
  for (std::size_t t = 0; t < bundle.step_count(); ++t) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < bundle.power_w.cols(); ++i) {
      total += bundle.power_w(static_cast<Eigen::Index>(t), i);
    }
    CHECK(bundle.p_total_w[t] == total);
  }
}

TEST_CASE("written outputs round trip and agree with the metrics module") {
  ScenarioConfig config = small_config(3, 60.0);
  const ResultsBundle bundle = wfmpc::run(config);
  const auto dir = std::filesystem::temp_directory_path() / "wfmpc_outputs";
  wfmpc::write_outputs(bundle, dir);

  const auto loads = wfmpc::csv::read_table(dir / "loads.csv");
  CHECK(loads.column_count() == 3 + 1);
  REQUIRE(loads.row_count() == bundle.step_count());

  Eigen::MatrixXd force(loads.row_count(), 3);
  for (std::size_t t = 0; t < loads.row_count(); ++t) {
    for (int i = 0; i < 3; ++i) {
      force(static_cast<Eigen::Index>(t), i) = loads.rows[t][static_cast<std::size_t>(i) + 1];
      CHECK(force(static_cast<Eigen::Index>(t), i) ==
            bundle.thrust_n(static_cast<Eigen::Index>(t), i));
    }
  }

  const auto power = wfmpc::csv::read_table(dir / "power.csv");
  std::vector<double> p_total, p_ref;
  for (std::size_t t = 0; t < power.row_count(); ++t) {
    p_ref.push_back(power.rows[t][1]);
    p_total.push_back(power.rows[t][2]);
  }

  // Metrics recomputed from the CSVs equal the bundle report exactly.
  auto [df_i, df] = wfmpc::metrics::dynamic_fatigue(force);
  auto [ef_i, ef] = wfmpc::metrics::equalization(force);
  CHECK(df == bundle.report.df_total);
  CHECK(ef == bundle.report.ef_total);
  CHECK(wfmpc::metrics::rms_error(p_total, p_ref) ==
        bundle.report.rms_tracking_error_w);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep shares traces, normalizes on w = 0 and matches single runs") {
  ScenarioConfig config = small_config(2, 40.0);
  const std::vector<std::pair<double, double>> grid{
      {0.0, 1.0}, {1e3, 1.0}, {1e3, 0.5}};
  const wfmpc::SweepTable table = wfmpc::sweep(config, grid);
  REQUIRE(table.cells.size() == 3);

  const auto* base = table.find(0.0, 1.0);
  REQUIRE(base != nullptr);
  CHECK(base->normalized);
  CHECK(base->df_normalized == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(base->ef_normalized == doctest::Approx(1.0).epsilon(1e-12));

  // A single-cell sweep reproduces run() output for the same weights.
  ScenarioConfig single = config;
  single.weights.w = 1e3;
  single.weights.s = 0.5;
  const ResultsBundle direct = wfmpc::run(single);
  const auto* cell = table.find(1e3, 0.5);
  REQUIRE(cell != nullptr);
  CHECK(cell->df_total == direct.report.df_total);
  CHECK(cell->ef_total == direct.report.ef_total);
  CHECK(cell->rms_tracking_error_w == direct.report.rms_tracking_error_w);

  // Grid order does not change results.
  const std::vector<std::pair<double, double>> permuted{
      {1e3, 0.5}, {0.0, 1.0}, {1e3, 1.0}};
  const wfmpc::SweepTable table2 = wfmpc::sweep(config, permuted);
  const auto* cell2 = table2.find(1e3, 0.5);
  REQUIRE(cell2 != nullptr);
  CHECK(cell2->df_total == cell->df_total);
  CHECK(cell2->ef_normalized == doctest::Approx(cell->ef_normalized).epsilon(1e-12));
}

TEST_CASE("every closed-loop solve is certified") {
  ScenarioConfig config = small_config(4, 60.0);
  config.weights.w = 1e3;
  config.weights.s = 0.6;
  const ResultsBundle bundle = wfmpc::run(config);
  REQUIRE_FALSE(bundle.aborted);
  for (const auto& diag : bundle.solver_log) {
    CHECK(diag.status == wfmpc::QpStatus::kSolved);
    CHECK(diag.residuals.max() <= 1e-6);
  }
}
