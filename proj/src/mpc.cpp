#include "wfmpc/mpc.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace wfmpc {

namespace {

constexpr double kWattPerMw = 1e6;
// The QP is assembled in MW/MN; dividing the raw-SI objective by 1e12 maps
// the paper's rate weight r onto r * 1e-12.
constexpr double kRateWeightScale = 1e-12;

// M x M first-difference operator with the first row anchored to an
// external previous value: (D v)_0 = v_0, (D v)_k = v_k - v_{k-1}.
Eigen::MatrixXd anchored_difference(int m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    d(k, k) = 1.0;
    if (k > 0) d(k, k - 1) = -1.0;
  }
  return d;
}

}  // namespace

void MpcWeights::validate() const {
  if (q_scale < 0.0) throw std::invalid_argument("weights: q_scale must be >= 0");
  if (r < 0.0) throw std::invalid_argument("weights: r must be >= 0");
  if (w < 0.0) throw std::invalid_argument("weights: w must be >= 0");
  if (s < 0.0 || s > 1.0) throw std::invalid_argument("weights: s must be in [0, 1]");
  if (s2_scale < 0.0) throw std::invalid_argument("weights: s2_scale must be >= 0");
}

void ConstraintSpec::validate() const {
  if (!(ct_min < ct_max)) {
    throw std::invalid_argument("constraints: ct_min must be below ct_max");
  }
  if (!(dct > 0.0)) throw std::invalid_argument("constraints: dct must be positive");
}

void MpcConfig::validate() const {
  weights.validate();
  constraints.validate();
  if (horizon < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
  if (dt_s <= 0.0) throw std::invalid_argument("mpc: dt must be positive");
  if (filter_tau_s < 0.0) throw std::invalid_argument("mpc: tau must be >= 0");
  if (half_rho_area <= 0.0) {
    throw std::invalid_argument("mpc: half_rho_area must be positive");
  }
  for (int c = 0; c < 3; ++c) {
    if (mu(c) < 0.0 || mu(c) > 1.0) {
      throw std::invalid_argument("mpc: correction gains must be in [0, 1]");
    }
  }
}

std::pair<double, double> discretize_filter(double tau_s, double dt_s) {
  if (tau_s < 0.0) throw std::invalid_argument("discretize_filter: tau must be >= 0");
  if (dt_s <= 0.0) throw std::invalid_argument("discretize_filter: dt must be positive");
  if (tau_s == 0.0) return {0.0, 1.0};
  const double a = std::exp(-dt_s / tau_s);
  return {a, 1.0 - a};
}

PredictionModel build_prediction(const std::vector<TurbineFeedback>& measured,
                                 const std::vector<double>& wind_frozen_mps,
                                 double filter_tau_s, double dt_s, int horizon,
                                 const Eigen::Vector3d& mu,
                                 const PredictedState* previous_prediction,
                                 double half_rho_area) {
  const int n = static_cast<int>(measured.size());
  if (n == 0) throw std::invalid_argument("build_prediction: no turbines");
  if (wind_frozen_mps.size() != measured.size()) {
    throw std::invalid_argument("build_prediction: wind vector size mismatch");
  }
  if (horizon < 1) throw std::invalid_argument("build_prediction: horizon must be >= 1");
  if (half_rho_area <= 0.0) {
    throw std::invalid_argument("build_prediction: half_rho_area must be positive");
  }

  PredictionModel model;
  model.n_ = n;
  model.m_ = horizon;
  model.a_.resize(n);
  model.b_.resize(n);
  model.kappa_f_.resize(n);
  model.kappa_p_.resize(n);
  model.chat0_.resize(n);
  model.corr_f_mn_.setZero(n);
  model.corr_p_mw_.setZero(n);
  model.corr_chat_.setZero(n);

  const auto [a_shared, b_shared] = discretize_filter(filter_tau_s, dt_s);
  for (int i = 0; i < n; ++i) {
    const double u = wind_frozen_mps[static_cast<std::size_t>(i)];
    if (!(u > 0.0)) {
      throw std::invalid_argument("build_prediction: frozen wind must be positive");
    }
    if (!std::isfinite(measured[static_cast<std::size_t>(i)].ct_prime)) {
      throw std::invalid_argument("build_prediction: non-finite feedback");
    }
    model.a_(i) = a_shared;
    model.b_(i) = b_shared;
    model.kappa_f_(i) = half_rho_area * u * u / kWattPerMw;      // MN per unit
    model.kappa_p_(i) = half_rho_area * u * u * u / kWattPerMw;  // MW per unit
    model.chat0_(i) = measured[static_cast<std::size_t>(i)].ct_prime;
  }
  model.uniform_filter_ = true;

  if (previous_prediction != nullptr) {
    if (previous_prediction->ct_prime.size() != n) {
      throw std::invalid_argument("build_prediction: previous prediction size mismatch");
    }
    for (int i = 0; i < n; ++i) {
      const auto& fb = measured[static_cast<std::size_t>(i)];
      model.corr_f_mn_(i) =
          mu(0) * (fb.thrust_n - previous_prediction->thrust_n(i)) / kWattPerMw;
      model.corr_p_mw_(i) =
          mu(1) * (fb.power_w - previous_prediction->power_w(i)) / kWattPerMw;
      model.corr_chat_(i) =
          mu(2) * (fb.ct_prime - previous_prediction->ct_prime(i));
    }
  }

  // Per-turbine chain and free response:
  // chat(t0+k) = a^k chat0 + b sum_j a^(k-1-j) u(j), k = 1..M.
  model.chain_.resize(static_cast<std::size_t>(n));
  model.chat_free_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(horizon, horizon);
    Eigen::VectorXd free(horizon);
    const double a = model.a_(i);
    const double b = model.b_(i);
    double apow = 1.0;
    for (int k = 1; k <= horizon; ++k) {
      apow *= a;  // a^k
      free(k - 1) = apow * model.chat0_(i);
      double w = b;
      for (int j = k - 1; j >= 0; --j) {
        chain(k - 1, j) = w;  // b * a^(k-1-j)
        w *= a;
      }
    }
    model.chain_[static_cast<std::size_t>(i)] = std::move(chain);
    model.chat_free_[static_cast<std::size_t>(i)] = std::move(free);
  }
  return model;
}

PredictionModel::Trajectories PredictionModel::predict(
    const Eigen::VectorXd& decisions) const {
  if (decisions.size() != num_vars()) {
    throw std::invalid_argument("predict: decision vector size mismatch");
  }
  Trajectories out;
  out.ct.resize(m_, n_);
  out.thrust_mn.resize(m_, n_);
  out.power_mw.resize(m_, n_);
  for (int i = 0; i < n_; ++i) {
    const auto ui = decisions.segment(static_cast<Eigen::Index>(i) * m_, m_);
    Eigen::VectorXd chat =
        chat_free_[static_cast<std::size_t>(i)] +
        chain_[static_cast<std::size_t>(i)] * ui;
    for (int k = 0; k < m_; ++k) {
      const double correction_f = (k == 0) ? corr_f_mn_(i) : 0.0;
      const double correction_p = (k == 0) ? corr_p_mw_(i) : 0.0;
      const double correction_c = (k == 0) ? corr_chat_(i) : 0.0;
      out.ct(k, i) = chat(k) + correction_c;
      out.thrust_mn(k, i) = kappa_f_(i) * chat(k) + correction_f;
      out.power_mw(k, i) = kappa_p_(i) * chat(k) + correction_p;
    }
  }
  return out;
}

Eigen::VectorXd PredictionModel::dispatch(
    const Eigen::VectorXd& decisions) const {
  if (decisions.size() != num_vars()) {
    throw std::invalid_argument("dispatch: decision vector size mismatch");
  }
  Eigen::VectorXd commands(n_);
  for (int i = 0; i < n_; ++i) {
    const double first_chat = chat_free_[static_cast<std::size_t>(i)](0) +
                              chain_[static_cast<std::size_t>(i)](0, 0) *
                                  decisions(static_cast<Eigen::Index>(i) * m_) +
                              corr_chat_(i);
    commands(i) = std::max(0.0, kappa_p_(i) * first_chat * kWattPerMw);
  }
  return commands;
}

void constraint_set(const Eigen::VectorXd& prev_ct, const ConstraintSpec& spec,
                    int horizon, Eigen::MatrixXd* ineq_matrix,
                    Eigen::VectorXd* ineq_bound) {
  spec.validate();
  if (horizon < 1) throw std::invalid_argument("constraint_set: horizon must be >= 1");
  const int n = static_cast<int>(prev_ct.size());
  if (n == 0) throw std::invalid_argument("constraint_set: empty previous vector");
  const Eigen::Index nv = static_cast<Eigen::Index>(n) * horizon;

  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(4 * nv, nv);
  Eigen::VectorXd bound(4 * nv);
  // Box rows.
  for (Eigen::Index v = 0; v < nv; ++v) {
    mat(v, v) = 1.0;
    bound(v) = spec.ct_max;
    mat(nv + v, v) = -1.0;
    bound(nv + v) = -spec.ct_min;
  }
  // Rate rows, anchored to the previously applied value at the first step.
  Eigen::Index row = 2 * nv;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < horizon; ++k) {
      const Eigen::Index idx = static_cast<Eigen::Index>(i) * horizon + k;
      mat(row, idx) = 1.0;
      mat(row + nv, idx) = -1.0;
      if (k == 0) {
        bound(row) = spec.dct + prev_ct(i);
        bound(row + nv) = spec.dct - prev_ct(i);
      } else {
        mat(row, idx - 1) = -1.0;
        mat(row + nv, idx - 1) = 1.0;
        bound(row) = spec.dct;
        bound(row + nv) = spec.dct;
      }
      ++row;
    }
  }
  *ineq_matrix = std::move(mat);
  *ineq_bound = std::move(bound);
}

namespace {

// Proposed-objective assembly (Eq. 10 structure). Terms at the measurement
// instant are constants and dropped into the offset; each rate/difference
// block anchors to the last applied or measured value so the objective is
// well defined at t0.
void assemble_proposed(const PredictionModel& model,
                       const Eigen::VectorXd& p_ref_mw,
                       const MpcWeights& weights,
                       const Eigen::VectorXd& prev_thrust_mn,
                       const Eigen::VectorXd& prev_ct, MpcQp* out) {
  const int n = model.turbines();
  const int m = model.horizon();
  const Eigen::Index nv = model.num_vars();
  const auto& kf = model.kappa_thrust_mn();
  const auto& kp = model.kappa_power_mw();

  const double q = weights.q_scale;
  const double r_scaled = weights.drop_rate_term ? 0.0 : weights.r * kRateWeightScale;
  const double w_rate = weights.w * weights.s;
  const double w_eq = weights.w * (1.0 - weights.s) * weights.s2_scale;

  // Affine constants of the predicted thrust/power chains (first rows carry
  // the corrections).
  std::vector<Eigen::VectorXd> c_f(static_cast<std::size_t>(n));
  std::vector<Eigen::VectorXd> c_p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& free = model.chain_free(i);
    c_f[static_cast<std::size_t>(i)] = kf(i) * free;
    c_f[static_cast<std::size_t>(i)](0) += model.correction_thrust_mn()(i);
    c_p[static_cast<std::size_t>(i)] = kp(i) * free;
    c_p[static_cast<std::size_t>(i)](0) += model.correction_power_mw()(i);
  }

  const Eigen::MatrixXd diff = anchored_difference(m);
  Eigen::MatrixXd& h = out->problem.hessian;
  Eigen::VectorXd& g = out->problem.gradient;
  h.setZero(nv, nv);
  g.setZero(nv);
  double offset = 0.0;

  // Shared M x M kernels (all turbines share one filter in practice).
  const Eigen::MatrixXd ltl0 = model.chain(0).transpose() * model.chain(0);
  const Eigen::MatrixXd dtd = diff.transpose() * diff;
  const Eigen::MatrixXd dl0 = diff * model.chain(0);
  const Eigen::MatrixXd dltdl0 = dl0.transpose() * dl0;

  // Tracking residual constant: sum_i P_i free response minus the reference.
  Eigen::VectorXd resid0 = -p_ref_mw;
  for (int i = 0; i < n; ++i) resid0 += c_p[static_cast<std::size_t>(i)];

  // Cross-turbine centered thrust constants for the equalization block.
  std::vector<Eigen::VectorXd> c_f_centered(static_cast<std::size_t>(n));
  {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) mean += c_f[static_cast<std::size_t>(i)];
    mean /= static_cast<double>(n);
    for (int i = 0; i < n; ++i) {
      c_f_centered[static_cast<std::size_t>(i)] =
          c_f[static_cast<std::size_t>(i)] - mean;
    }
  }

  for (int i = 0; i < n; ++i) {
    const Eigen::Index oi = static_cast<Eigen::Index>(i) * m;
    for (int j = 0; j < n; ++j) {
      const Eigen::Index oj = static_cast<Eigen::Index>(j) * m;
      const double centering = (i == j ? 1.0 : 0.0) - 1.0 / n;
      const double coef = 2.0 * q * kp(i) * kp(j) +
                          2.0 * w_eq * centering * kf(i) * kf(j);
      if (coef != 0.0) {
        if (model.uniform_filter()) {
          h.block(oi, oj, m, m) += coef * ltl0;
        } else {
          h.block(oi, oj, m, m) +=
              coef * model.chain(i).transpose() * model.chain(j);
        }
      }
    }
    const Eigen::MatrixXd& li =
        model.uniform_filter() ? model.chain(0) : model.chain(i);
    // Diagonal blocks: control-rate and load-rate kernels.
    if (r_scaled > 0.0) h.block(oi, oi, m, m) += 2.0 * r_scaled * dtd;
    if (w_rate > 0.0) {
      if (model.uniform_filter()) {
        h.block(oi, oi, m, m) += 2.0 * w_rate * kf(i) * kf(i) * dltdl0;
      } else {
        const Eigen::MatrixXd dli = diff * li;
        h.block(oi, oi, m, m) += 2.0 * w_rate * kf(i) * kf(i) *
                                 dli.transpose() * dli;
      }
    }

    // Gradient pieces.
    g.segment(oi, m) += 2.0 * q * kp(i) * (li.transpose() * resid0);
    if (r_scaled > 0.0) {
      g(oi) += -2.0 * r_scaled * prev_ct(i);
      offset += r_scaled * prev_ct(i) * prev_ct(i);
    }
    if (w_rate > 0.0) {
      Eigen::VectorXd load_const = diff * c_f[static_cast<std::size_t>(i)];
      load_const(0) -= prev_thrust_mn(i);
      g.segment(oi, m) +=
          2.0 * w_rate * kf(i) * ((diff * li).transpose() * load_const);
      offset += w_rate * load_const.squaredNorm();
    }
    if (w_eq > 0.0) {
      g.segment(oi, m) +=
          2.0 * w_eq * kf(i) *
          (li.transpose() * c_f_centered[static_cast<std::size_t>(i)]);
      offset += w_eq * c_f_centered[static_cast<std::size_t>(i)].dot(
                    c_f_centered[static_cast<std::size_t>(i)]);
    }
  }
  offset += q * resid0.squaredNorm();
  out->objective_offset = offset;
}

// Baseline-objective assembly (Eq. 13 structure): tracking plus a W-weighted
// load-rate block. Deliberately built by a different route - impulse-response
// simulation of the filter chains and explicit stacked maps - so it can act
// as an independent check against the proposed assembly at s = 1.
void assemble_baseline(const PredictionModel& model,
                       const Eigen::VectorXd& p_ref_mw,
                       const MpcWeights& weights,
                       const Eigen::VectorXd& prev_thrust_mn,
                       Eigen::VectorXd prev_ct_unused, MpcQp* out) {
  (void)prev_ct_unused;
  const int n = model.turbines();
  const int m = model.horizon();
  const Eigen::Index nv = model.num_vars();
  const auto& kf = model.kappa_thrust_mn();
  const auto& kp = model.kappa_power_mw();

  // Thrust map: row (i*m + k) gives F_i(t0+k+1) in MN; columns are decisions.
  Eigen::MatrixXd phi_f = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::VectorXd f_const(nv);
  Eigen::MatrixXd track = Eigen::MatrixXd::Zero(m, nv);
  Eigen::VectorXd track_const = -p_ref_mw;
  for (int i = 0; i < n; ++i) {
    const Eigen::Index oi = static_cast<Eigen::Index>(i) * m;
    const double a = model.filter_a()(i);
    const double b = model.filter_b()(i);
    // Unit impulse responses of the discrete filter.
    for (int j = 0; j < m; ++j) {
      double chat = 0.0;
      for (int k = 0; k < m; ++k) {
        chat = a * chat + b * (k == j ? 1.0 : 0.0);
        phi_f(oi + k, oi + j) = kf(i) * chat;
        track(k, oi + j) += kp(i) * chat;
      }
    }
    // Zero-input response plus first-step corrections.
    double chat = model.measured_ct()(i);
    for (int k = 0; k < m; ++k) {
      chat = a * chat;
      f_const(oi + k) =
          kf(i) * chat + (k == 0 ? model.correction_thrust_mn()(i) : 0.0);
      track_const(k) +=
          kp(i) * chat + (k == 0 ? model.correction_power_mw()(i) : 0.0);
    }
  }

  // Load-rate stack: first difference along each turbine's rows, anchored to
  // the measured thrust.
  Eigen::MatrixXd load = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::VectorXd load_const(nv);
  for (int i = 0; i < n; ++i) {
    const Eigen::Index oi = static_cast<Eigen::Index>(i) * m;
    for (int k = 0; k < m; ++k) {
      load.row(oi + k) = phi_f.row(oi + k);
      load_const(oi + k) = f_const(oi + k);
      if (k == 0) {
        load_const(oi + k) -= prev_thrust_mn(i);
      } else {
        load.row(oi + k) -= phi_f.row(oi + k - 1);
        load_const(oi + k) -= f_const(oi + k - 1);
      }
    }
  }

  const double q = weights.q_scale;
  const double w = weights.w;
  out->problem.hessian = 2.0 * q * track.transpose() * track +
                         2.0 * w * load.transpose() * load;
  out->problem.gradient = 2.0 * q * track.transpose() * track_const +
                          2.0 * w * load.transpose() * load_const;
  out->objective_offset =
      q * track_const.squaredNorm() + w * load_const.squaredNorm();
}

void check_hessian(const Eigen::MatrixXd& h) {
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::logic_error("assemble_qp: Hessian not symmetric");
  }
  // Full spectral check only at sizes where it is cheap; the assembly is a
  // sum of PSD blocks so larger instances rely on construction.
  if (h.rows() <= 256) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        h, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
      throw std::logic_error("assemble_qp: Hessian not positive semidefinite");
    }
  }
}

}  // namespace

MpcQp assemble_qp(const PredictionModel& model,
                  const Eigen::VectorXd& p_ref_horizon_w,
                  const MpcWeights& weights,
                  const Eigen::VectorXd& prev_thrust_n,
                  const Eigen::VectorXd& prev_ct,
                  const ConstraintSpec& constraints, ObjectiveKind kind) {
  weights.validate();
  const int n = model.turbines();
  const int m = model.horizon();
  if (p_ref_horizon_w.size() != m) {
    throw std::invalid_argument("assemble_qp: reference horizon size mismatch");
  }
  if (prev_thrust_n.size() != n || prev_ct.size() != n) {
    throw std::invalid_argument("assemble_qp: previous state size mismatch");
  }
  if (!p_ref_horizon_w.allFinite()) {
    throw std::invalid_argument("assemble_qp: non-finite reference");
  }

  MpcQp out;
  const Eigen::VectorXd p_ref_mw = p_ref_horizon_w / kWattPerMw;
  const Eigen::VectorXd prev_thrust_mn = prev_thrust_n / kWattPerMw;
  if (kind == ObjectiveKind::kProposed) {
    assemble_proposed(model, p_ref_mw, weights, prev_thrust_mn, prev_ct, &out);
  } else {
    assemble_baseline(model, p_ref_mw, weights, prev_thrust_mn, prev_ct, &out);
  }
  check_hessian(out.problem.hessian);
  constraint_set(prev_ct, constraints, m, &out.problem.ineq_matrix,
                 &out.problem.ineq_bound);
  return out;
}

MpcController::MpcController(MpcConfig config) : config_(std::move(config)) {
  config_.validate();
}

void MpcController::reset(const Eigen::VectorXd& applied_ct) {
  prev_applied_ = applied_ct;
  prev_prediction_.reset();
  warm_.reset();
}

MpcStepResult MpcController::step(const std::vector<TurbineFeedback>& feedback,
                                  const std::vector<double>& wind_frozen_mps,
                                  const Eigen::VectorXd& p_ref_horizon_w) {
  const int n = static_cast<int>(feedback.size());
  if (n == 0) throw std::invalid_argument("mpc step: no feedback");
  if (prev_applied_.size() != n) {
    throw std::invalid_argument(
        "mpc step: controller not reset for this turbine count");
  }
  const int m = config_.horizon;

  const PredictionModel model = build_prediction(
      feedback, wind_frozen_mps, config_.filter_tau_s, config_.dt_s, m,
      config_.mu, prev_prediction_ ? &*prev_prediction_ : nullptr,
      config_.half_rho_area);

  Eigen::VectorXd prev_thrust(n);
  for (int i = 0; i < n; ++i) {
    prev_thrust(i) = feedback[static_cast<std::size_t>(i)].thrust_n;
  }

  MpcStepResult result;
  MpcQp mpc_qp =
      assemble_qp(model, p_ref_horizon_w, config_.weights, prev_thrust,
                  prev_applied_, config_.constraints, config_.kind);
  result.objective_offset = mpc_qp.objective_offset;
  result.solution =
      solve(mpc_qp.problem, config_.solver, warm_ ? &*warm_ : nullptr);

  const Eigen::VectorXd& u = result.solution.x;
  result.optimal_ct = u;
  result.power_commands_w = model.dispatch(u);
  result.predicted = model.predict(u);

  // Receding-horizon bookkeeping: remember the first predicted block for the
  // next correction, apply only the first step, shift the solution for the
  // next warm start.
  PredictedState pred;
  pred.thrust_n = result.predicted.thrust_mn.row(0).transpose() * 1e6;
  pred.power_w = result.predicted.power_mw.row(0).transpose() * 1e6;
  pred.ct_prime = result.predicted.ct.row(0).transpose();
  prev_prediction_ = std::move(pred);

  for (int i = 0; i < n; ++i) {
    prev_applied_(i) = u(static_cast<Eigen::Index>(i) * m);
  }

  QpWarmStart warm;
  warm.x.resize(u.size());
  for (int i = 0; i < n; ++i) {
    const Eigen::Index oi = static_cast<Eigen::Index>(i) * m;
    for (int k = 0; k + 1 < m; ++k) warm.x(oi + k) = u(oi + k + 1);
    warm.x(oi + m - 1) = u(oi + m - 1);
  }
  warm.duals = result.solution.duals;
  warm_ = std::move(warm);

  return result;
}

}  // namespace wfmpc
