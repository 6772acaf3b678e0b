// Receding-horizon problem construction: per-turbine first-order filter
// dynamics with measurement correction, stacked over the horizon; a convex
// quadratic objective trading power tracking against control rate, load rate
// and load equalization; box and rate constraints; and conversion of the
// first optimal step into per-turbine power commands.
//
// The QP works in megawatts and meganewtons. That is a uniform rescale of
// the raw-SI objective by 1e-12, so minimizers are unchanged while Hessian
// entries stay near unity; the rate weight r is rescaled accordingly.
#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "wfmpc/qp.hpp"

namespace wfmpc {

struct MpcWeights {
  double q_scale = 1.0;   // tracking weight per horizon step
  double r = 1e12;        // control-rate weight, raw SI convention
  double w = 0.0;         // load penalty factor
  double s = 1.0;         // load-rate vs equalization trade-off, in [0, 1]
  double s2_scale = 1e-2; // relative scale of the equalization block
  bool drop_rate_term = false;  // drop R to mirror the baseline objective

  void validate() const;
};

struct ConstraintSpec {
  double ct_min = 0.1;
  double ct_max = 2.0;
  double dct = 0.2;  // per-step rate bound

  void validate() const;
};

// Measured [F P C_T'] feedback for one turbine.
struct TurbineFeedback {
  double thrust_n = 0.0;
  double power_w = 0.0;
  double ct_prime = 0.0;
};

// Prediction of the same triple, stored between steps for the correction.
struct PredictedState {
  Eigen::VectorXd thrust_n;  // N
  Eigen::VectorXd power_w;   // N
  Eigen::VectorXd ct_prime;  // N
};

// Exact zero-order-hold discretization of the filter: a_d = exp(-dt/tau),
// b_d = 1 - a_d; tau = 0 degenerates to the pass-through (0, 1).
std::pair<double, double> discretize_filter(double tau_s, double dt_s);

// Decision vector layout: turbine-major, index(i, k) = i*M + k with k = 0
// the input applied over [t0, t0+1).
class PredictionModel {
 public:
  struct Trajectories {
    Eigen::MatrixXd ct;         // M x N, predicted filtered coefficient
    Eigen::MatrixXd thrust_mn;  // M x N
    Eigen::MatrixXd power_mw;   // M x N
  };

  int turbines() const { return n_; }
  int horizon() const { return m_; }
  Eigen::Index num_vars() const { return static_cast<Eigen::Index>(n_) * m_; }

  // Applies the affine prediction maps to a stacked decision vector.
  // Row k-1 of each matrix is the prediction for t0+k; first-step rows
  // carry the measurement corrections.
  Trajectories predict(const Eigen::VectorXd& decisions) const;

  // Power commands from the first horizon step only (Eq. 12 convention):
  // P*_i = 1/2 rho A chat_i(t0+1) U_i^3, in watts.
  Eigen::VectorXd dispatch(const Eigen::VectorXd& decisions) const;

  const Eigen::VectorXd& filter_a() const { return a_; }
  const Eigen::VectorXd& filter_b() const { return b_; }
  const Eigen::VectorXd& kappa_thrust_mn() const { return kappa_f_; }
  const Eigen::VectorXd& kappa_power_mw() const { return kappa_p_; }
  const Eigen::VectorXd& measured_ct() const { return chat0_; }
  const Eigen::VectorXd& correction_thrust_mn() const { return corr_f_mn_; }
  const Eigen::VectorXd& correction_power_mw() const { return corr_p_mw_; }
  const Eigen::VectorXd& correction_ct() const { return corr_chat_; }
  bool uniform_filter() const { return uniform_filter_; }
  // M x M map from turbine i's decisions to its filtered-coefficient
  // trajectory, and the matching zero-input response (corrections excluded).
  const Eigen::MatrixXd& chain(int turbine) const {
    return chain_[static_cast<std::size_t>(turbine)];
  }
  const Eigen::VectorXd& chain_free(int turbine) const {
    return chat_free_[static_cast<std::size_t>(turbine)];
  }

 private:
  friend PredictionModel build_prediction(
      const std::vector<TurbineFeedback>&, const std::vector<double>&, double,
      double, int, const Eigen::Vector3d&, const PredictedState*, double);

  int n_ = 0, m_ = 0;
  Eigen::VectorXd a_, b_;          // per-turbine filter pair
  Eigen::VectorXd kappa_f_;        // MN per unit coefficient, per turbine
  Eigen::VectorXd kappa_p_;        // MW per unit coefficient, per turbine
  Eigen::VectorXd chat0_;          // measured coefficient at t0
  Eigen::VectorXd corr_f_mn_, corr_p_mw_, corr_chat_;  // first-step corrections
  bool uniform_filter_ = true;
  // Per-turbine M x M chain: chat_i(t0+k) = chain(k-1, j) u_i(j) + free.
  std::vector<Eigen::MatrixXd> chain_;
  std::vector<Eigen::VectorXd> chat_free_;  // per-turbine M free response
};

// Builds the horizon model from measured feedback and frozen wind speeds.
// mu = (mu_F, mu_P, mu_chat) blends the measurement/prediction mismatch into
// the first predicted block; with no previous prediction the correction is
// zero. half_rho_area = 1/2 rho A.
PredictionModel build_prediction(const std::vector<TurbineFeedback>& measured,
                                 const std::vector<double>& wind_frozen_mps,
                                 double filter_tau_s, double dt_s, int horizon,
                                 const Eigen::Vector3d& mu,
                                 const PredictedState* previous_prediction,
                                 double half_rho_area);

// Eq. 11: box rows for every variable plus rate rows between consecutive
// horizon steps and against the previously applied value.
void constraint_set(const Eigen::VectorXd& prev_ct, const ConstraintSpec& spec,
                    int horizon, Eigen::MatrixXd* ineq_matrix,
                    Eigen::VectorXd* ineq_bound);

enum class ObjectiveKind {
  kProposed,  // tracking + R + w(s S1 + (1-s) s2 S2)
  kBaseline,  // tracking + w * load-rate, assembled by an independent route
};

struct MpcQp {
  QpProblem problem;
  double objective_offset = 0.0;  // constant term dropped from the QP

  double objective_value(const Eigen::VectorXd& decisions) const {
    return qp_objective(problem, decisions) + objective_offset;
  }
};

MpcQp assemble_qp(const PredictionModel& model,
                  const Eigen::VectorXd& p_ref_horizon_w,
                  const MpcWeights& weights,
                  const Eigen::VectorXd& prev_thrust_n,
                  const Eigen::VectorXd& prev_ct,
                  const ConstraintSpec& constraints,
                  ObjectiveKind kind = ObjectiveKind::kProposed);

struct MpcConfig {
  MpcWeights weights;
  ConstraintSpec constraints;
  int horizon = 10;
  double dt_s = 1.0;
  double filter_tau_s = 5.0;
  Eigen::Vector3d mu{0.5, 0.5, 0.5};
  double half_rho_area = 0.0;  // 1/2 rho A, set from the turbine parameters
  QpSettings solver;
  ObjectiveKind kind = ObjectiveKind::kProposed;

  void validate() const;
};

struct MpcStepResult {
  Eigen::VectorXd power_commands_w;       // N
  Eigen::VectorXd optimal_ct;             // N*M decision vector
  PredictionModel::Trajectories predicted;
  QpSolution solution;
  double objective_offset = 0.0;
};

// Stateful receding-horizon controller: stores the previously applied
// coefficients, the previous first-step prediction for the correction term,
// and the shifted solution used as warm start.
class MpcController {
 public:
  explicit MpcController(MpcConfig config);

  // Resets to a known applied coefficient vector (e.g. a stabilized start).
  void reset(const Eigen::VectorXd& applied_ct);

  MpcStepResult step(const std::vector<TurbineFeedback>& feedback,
                     const std::vector<double>& wind_frozen_mps,
                     const Eigen::VectorXd& p_ref_horizon_w);

  const MpcConfig& config() const { return config_; }
  const Eigen::VectorXd& previous_applied() const { return prev_applied_; }

 private:
  MpcConfig config_;
  Eigen::VectorXd prev_applied_;          // N
  std::optional<PredictedState> prev_prediction_;
  std::optional<QpWarmStart> warm_;
};

}  // namespace wfmpc
