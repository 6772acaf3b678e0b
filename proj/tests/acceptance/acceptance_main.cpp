// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.
//
//  1. (w, s) sweep trends on the reference 8-turbine column within budget
//  2. tracking neutrality between s = 1 and s = 0.5
//  3. over-penalization at w = 1e4 visibly degrades tracking
//  4. farm dF non-increasing in w at s = 1
//  5. every closed-loop solve certified to 1e-6 KKT residuals
//  6. solver vs projected-gradient oracle; objective-route equivalence
//  7. unit-level exactness (filter, thrust/power, metrics recomputation)
//  8. bit-identical outputs for identical config and seed
//  9. 64-turbine, 900-step scenario completes within the time budget
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wfmpc/csv.hpp"
#include "wfmpc/metrics.hpp"
#include "wfmpc/mpc.hpp"
#include "wfmpc/qp.hpp"
#include "wfmpc/scenario.hpp"
#include "wfmpc/simulation.hpp"

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return std::string(buf);
}

double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Projected gradient on box-constrained QPs, run to a tight fixed point.
Eigen::VectorXd projected_gradient_oracle(const Eigen::MatrixXd& h,
                                          const Eigen::VectorXd& g,
                                          const Eigen::VectorXd& lower,
                                          const Eigen::VectorXd& upper) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  const double step = 1.0 / std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  Eigen::VectorXd x = 0.5 * (lower + upper);
  for (long it = 0; it < 2000000; ++it) {
    Eigen::VectorXd next =
        (x - step * (h * x + g)).cwiseMax(lower).cwiseMin(upper);
    const double move = (next - x).lpNorm<Eigen::Infinity>();
    x = next;
    if (move < 1e-14) break;
  }
  return x;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path scenario_dir =
      argc > 1 ? std::filesystem::path(argv[1]) : "scenarios";

  // ---- Criteria 1-5: sweep protocol on the reference column ----
  wfmpc::ScenarioConfig config;
  bool sweep_ok = false;
  wfmpc::SweepTable table;
  double sweep_seconds = 0.0;
  try {
    config = wfmpc::load_scenario(scenario_dir / "default.json");
    const std::vector<std::pair<double, double>> grid{
        {0.0, 1.0},    {1e2, 1.0},  {1e3, 1.0},
        {1e4, 1.0},    {1e3, 0.75}, {1e3, 0.5}};
    const auto start = std::chrono::steady_clock::now();
    table = wfmpc::sweep(config, grid);
    sweep_seconds = seconds_since(start);
    sweep_ok = true;
  } catch (const std::exception& e) {
    report(1, false, fmt("sweep failed to run: %s", e.what()));
    report(2, false, "skipped (sweep failed)");
    report(3, false, "skipped (sweep failed)");
    report(4, false, "skipped (sweep failed)");
    report(5, false, "skipped (sweep failed)");
  }

  if (sweep_ok) {
    const auto* base = table.find(0.0, 1.0);
    const auto* w2 = table.find(1e2, 1.0);
    const auto* w3 = table.find(1e3, 1.0);
    const auto* w4 = table.find(1e4, 1.0);
    const auto* s075 = table.find(1e3, 0.75);
    const auto* s05 = table.find(1e3, 0.5);

    {
      const double ef_ratio = s075->ef_normalized / w3->ef_normalized;
      const double df_ratio = s075->df_normalized / w3->df_normalized;
      const bool pass = ef_ratio <= 0.80 && df_ratio <= 1.10 &&
                        s05->ef_normalized < s075->ef_normalized &&
                        sweep_seconds <= 60.0;
      report(1, pass,
             fmt("eF(s=.75)/eF(s=1)=%.3f (<=0.80), dF ratio=%.3f (<=1.10), "
                 "eF(s=.5)=%.3f < eF(s=.75)=%.3f, sweep %.1f s (<=60)",
                 ef_ratio, df_ratio, s05->ef_normalized, s075->ef_normalized,
                 sweep_seconds));
    }
    {
      const double rel = std::abs(s05->rms_tracking_error_w -
                                  w3->rms_tracking_error_w) /
                         w3->rms_tracking_error_w;
      report(2, rel <= 0.05,
             fmt("RMS change s=1 -> s=0.5 is %.2f%% (<=5%%)", 100.0 * rel));
    }
    {
      const double ratio = w4->rms_tracking_error_w / base->rms_tracking_error_w;
      report(3, ratio >= 1.25,
             fmt("RMS(w=1e4)/RMS(w=0) = %.2f (>=1.25)", ratio));
    }
    {
      const bool pass =
          base->df_total >= w2->df_total && w2->df_total >= w3->df_total;
      report(4, pass,
             fmt("dF at w={0,1e2,1e3}: %.0f >= %.0f >= %.0f N", base->df_total,
                 w2->df_total, w3->df_total));
    }
    {
      double worst = 0.0;
      std::size_t solves = 0;
      bool all = true;
      for (const auto& cell : table.cells) {
        worst = std::max(worst, cell.worst_residual);
        solves += cell.solve_count;
        all = all && cell.all_solved;
      }
      report(5, all && worst <= 1e-6,
             fmt("%zu closed-loop solves, worst KKT residual %.2e (<=1e-6)",
                 solves, worst));
    }
  }

  // ---- Criterion 6: solver oracle and objective-route equivalence ----
  {
    std::mt19937 rng(8888);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> size_dist(2, 20);
    std::uniform_real_distribution<double> eig_dist(0.1, 10.0);
    double worst_gap = 0.0;
    bool solver_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
      const int n = size_dist(rng);
      Eigen::MatrixXd raw(n, n);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) raw(r, c) = gauss(rng);
      }
      const Eigen::MatrixXd q_mat =
          Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
      Eigen::VectorXd eigs(n);
      for (int k = 0; k < n; ++k) eigs(k) = eig_dist(rng);
      const Eigen::MatrixXd h = q_mat * eigs.asDiagonal() * q_mat.transpose();
      Eigen::VectorXd g(n), lower(n), upper(n);
      for (int k = 0; k < n; ++k) {
        g(k) = 5.0 * gauss(rng);
        const double c = gauss(rng);
        lower(k) = c - std::abs(gauss(rng)) - 0.1;
        upper(k) = c + std::abs(gauss(rng)) + 0.1;
      }
      wfmpc::QpProblem problem;
      problem.hessian = h;
      problem.gradient = g;
      problem.ineq_matrix.resize(0, n);
      problem.ineq_bound.resize(0);
      problem.append_box(lower, upper);
      const wfmpc::QpSolution sol = wfmpc::solve(problem);
      const Eigen::VectorXd oracle =
          projected_gradient_oracle(h, g, lower, upper);
      const double gap = (sol.x - oracle).lpNorm<Eigen::Infinity>();
      worst_gap = std::max(worst_gap, gap);
      if (sol.status != wfmpc::QpStatus::kSolved || gap > 1e-4) {
        solver_ok = false;
      }
    }

    // Objective equivalence: proposed objective at s = 1 with the rate term
    // dropped equals the baseline objective on random decision vectors.
    bool objective_ok = true;
    double worst_rel = 0.0;
    {
      const double half_rho_area = 0.5 * 1.2 * 12468.981242097889;
      std::uniform_real_distribution<double> u_dist(6.0, 11.0);
      std::uniform_real_distribution<double> ct_dist(0.1, 2.0);
      const int n = 5, m = 8;
      std::vector<wfmpc::TurbineFeedback> feedback;
      std::vector<double> wind;
      Eigen::VectorXd prev_thrust(n), prev_ct(n);
      for (int i = 0; i < n; ++i) {
        const double u = u_dist(rng);
        const double ct = ct_dist(rng);
        wfmpc::TurbineFeedback fb;
        fb.ct_prime = ct;
        fb.thrust_n = half_rho_area * ct * u * u;
        fb.power_w = fb.thrust_n * u;
        feedback.push_back(fb);
        wind.push_back(u);
        prev_thrust(i) = fb.thrust_n;
        prev_ct(i) = ct;
      }
      const wfmpc::PredictionModel model = wfmpc::build_prediction(
          feedback, wind, 5.0, 1.0, m, Eigen::Vector3d::Zero(), nullptr,
          half_rho_area);
      wfmpc::MpcWeights weights;
      weights.w = 750.0;
      weights.s = 1.0;
      weights.drop_rate_term = true;
      wfmpc::ConstraintSpec spec;
      const Eigen::VectorXd p_ref = Eigen::VectorXd::Constant(m, 1.8e7);
      const wfmpc::MpcQp proposed =
          wfmpc::assemble_qp(model, p_ref, weights, prev_thrust, prev_ct, spec,
                             wfmpc::ObjectiveKind::kProposed);
      const wfmpc::MpcQp baseline =
          wfmpc::assemble_qp(model, p_ref, weights, prev_thrust, prev_ct, spec,
                             wfmpc::ObjectiveKind::kBaseline);
      for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd u(n * m);
        for (int k = 0; k < n * m; ++k) u(k) = ct_dist(rng);
        const double a = proposed.objective_value(u);
        const double b = baseline.objective_value(u);
        const double rel = std::abs(a - b) / std::max(1.0, std::abs(b));
        worst_rel = std::max(worst_rel, rel);
        if (rel > 1e-9) objective_ok = false;
      }
    }
    report(6, solver_ok && objective_ok,
           fmt("oracle gap %.2e (<=1e-4); objective route mismatch %.2e "
               "(<=1e-9)",
               worst_gap, worst_rel));
  }

  // ---- Criterion 7: unit-level exactness ----
  {
    bool pass = true;
    std::string detail;
    // Zero-order-hold filter discretization.
    double worst_filter = 0.0;
    for (double tau : {0.5, 1.0, 5.0, 20.0}) {
      for (double dt : {0.1, 0.5, 1.0, 2.0}) {
        const auto [a, b] = wfmpc::discretize_filter(tau, dt);
        worst_filter =
            std::max(worst_filter, std::abs(a - std::exp(-dt / tau)));
        worst_filter = std::max(worst_filter, std::abs(b - (1.0 - a)));
      }
    }
    if (worst_filter > 1e-12) pass = false;

    // Thrust/power against direct evaluation.
    wfmpc::TurbineParams params;
    const double c = 0.5 * params.air_density * params.rotor_area_m2;
    double worst_rel = 0.0;
    const auto rel_err = [](double a, double b) {
      return std::abs(a - b) / std::max(1.0, std::abs(b));
    };
    worst_rel = std::max(worst_rel, rel_err(wfmpc::thrust(1.0, 10.0, params),
                                            c * 100.0));
    worst_rel = std::max(worst_rel, rel_err(wfmpc::thrust(2.0, 9.0, params),
                                            c * 2.0 * 81.0));
    worst_rel = std::max(worst_rel, rel_err(wfmpc::power(1.0, 10.0, params),
                                            c * 1000.0));
    worst_rel = std::max(worst_rel, rel_err(wfmpc::power(2.0, 9.0, params),
                                            c * 2.0 * 729.0));
    if (worst_rel > 1e-6) pass = false;

    // Metrics equal an independent recomputation on a logged run, exactly.
    bool metrics_exact = true;
    try {
      wfmpc::ScenarioConfig small = config;
      small.duration_s = 60.0;
      small.layout = wfmpc::FarmLayout::column(4, 5.0, 126.0);
      const wfmpc::ResultsBundle bundle = wfmpc::run(small);
      const Eigen::MatrixXd& f = bundle.thrust_n;
      for (int i = 0; i < f.cols() && metrics_exact; ++i) {
        double acc = 0.0;
        for (int t = 1; t < f.rows(); ++t) {
          const double d = f(t, i) - f(t - 1, i);
          acc += d * d;
        }
        const double df = std::sqrt(acc / static_cast<double>(f.rows()));
        if (df != bundle.report.df_per_turbine[static_cast<std::size_t>(i)]) {
          metrics_exact = false;
        }
      }
      double acc = 0.0;
      for (std::size_t t = 0; t < bundle.p_total_w.size(); ++t) {
        const double d = bundle.p_total_w[t] - bundle.p_ref_w[t];
        acc += d * d;
      }
      if (std::sqrt(acc / static_cast<double>(bundle.p_total_w.size())) !=
          bundle.report.rms_tracking_error_w) {
        metrics_exact = false;
      }
    } catch (const std::exception&) {
      metrics_exact = false;
    }
    if (!metrics_exact) pass = false;
    report(7, pass,
           fmt("filter |a-e^(-dt/tau)| %.1e (<=1e-12); thrust/power rel %.1e "
               "(<=1e-6); metrics recomputation %s",
               worst_filter, worst_rel, metrics_exact ? "exact" : "MISMATCH"));
  }

  // ---- Criterion 8: bit-identical outputs ----
  {
    bool pass = true;
    std::string note = "power/loads/ct/wind CSVs byte-identical across reruns";
    try {
      wfmpc::ScenarioConfig small = config;
      small.duration_s = 120.0;
      small.layout = wfmpc::FarmLayout::column(4, 5.0, 126.0);
      const auto dir_a =
          std::filesystem::temp_directory_path() / "wfmpc_accept_a";
      const auto dir_b =
          std::filesystem::temp_directory_path() / "wfmpc_accept_b";
      wfmpc::write_outputs(wfmpc::run(small), dir_a);
      wfmpc::write_outputs(wfmpc::run(small), dir_b);
      for (const char* name :
           {"power.csv", "loads.csv", "ct.csv", "wind.csv", "solver.csv"}) {
        if (slurp(dir_a / name) != slurp(dir_b / name)) {
          pass = false;
          note = std::string(name) + " differs between identical runs";
        }
      }
      std::filesystem::remove_all(dir_a);
      std::filesystem::remove_all(dir_b);
    } catch (const std::exception& e) {
      pass = false;
      note = e.what();
    }
    report(8, pass, note);
  }

  // ---- Criterion 9: 64-turbine scale check ----
  {
    bool pass = false;
    std::string note;
    try {
      const wfmpc::ScenarioConfig big =
          wfmpc::load_scenario(scenario_dir / "farm64_9ms.json");
      const auto start = std::chrono::steady_clock::now();
      const wfmpc::ResultsBundle bundle = wfmpc::run(big);
      const double elapsed = seconds_since(start);
      double worst = 0.0;
      bool all = true;
      for (const auto& diag : bundle.solver_log) {
        worst = std::max(worst, diag.residuals.max());
        all = all && diag.status == wfmpc::QpStatus::kSolved;
      }
      pass = !bundle.aborted && elapsed <= 900.0 && all && worst <= 1e-6;
      note = fmt("64 WT x %zu steps in %.0f s (<=900); worst residual %.2e",
                 bundle.step_count(), elapsed, worst);
    } catch (const std::exception& e) {
      note = e.what();
    }
    report(9, pass, note);
  }

  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
