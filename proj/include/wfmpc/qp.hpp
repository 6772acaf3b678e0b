// Dense convex QP solver for problems of the form
//
//   minimize    1/2 x' H x + g' x
//   subject to  G x <= h
//
// using an over-relaxed operator-splitting (ADMM) iteration with a cached
// factorization, followed by an active-set polish that solves the KKT system
// of the identified active constraints. Every solve reports the four KKT
// residual norms, recomputable from (problem, x, duals).
//
// Variable bounds are plain rows of G; append_box() builds them.
#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <limits>

namespace wfmpc {

struct QpProblem {
  Eigen::MatrixXd hessian;      // H, symmetric PSD, n x n
  Eigen::VectorXd gradient;     // g, n
  Eigen::MatrixXd ineq_matrix;  // G, m x n (m may be 0)
  Eigen::VectorXd ineq_bound;   // h, m

  Eigen::Index num_vars() const { return hessian.rows(); }
  Eigen::Index num_constraints() const { return ineq_matrix.rows(); }
  void validate() const;

  // Appends lower <= x <= upper as rows (x <= upper first, then -x <= -lower).
  void append_box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
};

enum class QpStatus { kSolved, kMaxIterations, kInfeasible };

struct QpResiduals {
  double stationarity = 0.0;    // ||H x + g + G' nu||_inf
  double primal = 0.0;          // ||max(G x - h, 0)||_inf
  double dual = 0.0;            // ||min(nu, 0)||_inf
  double complementarity = 0.0; // ||nu .* (G x - h)||_inf

  double max() const;
  bool within(double tol) const { return max() <= tol; }
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd duals;  // nu, one per constraint row
  int iterations = 0;
  QpStatus status = QpStatus::kMaxIterations;
  QpResiduals residuals;
  bool polished = false;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

struct QpSettings {
  double tol = 1e-6;
  int max_iter = 4000;
  double rho = 0.1;          // constraint penalty
  double sigma = 1e-6;       // proximal regularization
  double alpha = 1.6;        // over-relaxation
  bool adaptive_rho = true;
  bool polish = true;
  int check_interval = 25;
  double infeasible_dual_norm = 1e9;
};

struct QpWarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd duals;
};

QpSolution solve(const QpProblem& problem, const QpSettings& settings = {},
                 const QpWarmStart* warm = nullptr);

QpResiduals kkt_residuals(const QpProblem& problem, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& duals);

double qp_objective(const QpProblem& problem, const Eigen::VectorXd& x);

// Plain-text exchange format for offline oracle comparison: a dimension
// header "n m" followed by H, g, G, h row-major.
void save_problem(const std::filesystem::path& path, const QpProblem& problem);
QpProblem load_problem(const std::filesystem::path& path);

}  // namespace wfmpc
