#include "wfmpc/turbine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wfmpc/csv.hpp"

namespace wfmpc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Rotor speed floor used only to keep the aerodynamic torque P/omega finite.
constexpr double kOmegaTorqueGuard = 1e-3;

double interp_fraction(const std::vector<double>& grid, double x,
                       std::size_t* index) {
  if (x <= grid.front()) {
    *index = 0;
    return 0.0;
  }
  if (x >= grid.back()) {
    *index = grid.size() - 2;
    return 1.0;
  }
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  *index = static_cast<std::size_t>(it - grid.begin()) - 1;
  return (x - grid[*index]) / (grid[*index + 1] - grid[*index]);
}

}  // namespace

CtTable CtTable::from_csv(const std::filesystem::path& path) {
  const auto table = csv::read_table(path);
  if (table.column_count() < 3 || table.row_count() < 2) {
    throw std::runtime_error("ct table: need at least a 2x2 grid");
  }
  CtTable out;
  // Header: first cell is a label, remaining cells are beta values.
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    out.betas_.push_back(std::stod(table.header[c]));
  }
  for (const auto& row : table.rows) {
    out.lambdas_.push_back(row[0]);
    out.values_.emplace_back(row.begin() + 1, row.end());
  }
  if (!std::is_sorted(out.lambdas_.begin(), out.lambdas_.end()) ||
      !std::is_sorted(out.betas_.begin(), out.betas_.end())) {
    throw std::runtime_error("ct table: grid axes must be ascending");
  }
  return out;
}

double CtTable::value(double lambda, double beta_deg) const {
  std::size_t i = 0, j = 0;
  const double fx = interp_fraction(lambdas_, lambda, &i);
  const double fy = interp_fraction(betas_, beta_deg, &j);
  const double v00 = values_[i][j];
  const double v10 = values_[i + 1][j];
  const double v01 = values_[i][j + 1];
  const double v11 = values_[i + 1][j + 1];
  return (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) +
         fx * ((1.0 - fy) * v10 + fy * v11);
}

void TurbineParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) {
      throw std::invalid_argument(std::string("turbine params: ") + name +
                                  " must be positive");
    }
  };
  positive(air_density, "air_density");
  positive(rotor_radius_m, "rotor_radius_m");
  positive(rotor_area_m2, "rotor_area_m2");
  positive(inertia_kgm2, "inertia_kgm2");
  positive(gearbox_ratio, "gearbox_ratio");
  positive(torque_kp, "torque_kp");
  positive(torque_ki, "torque_ki");
  positive(converter_tau_s, "converter_tau_s");
  positive(gen_torque_max_nm, "gen_torque_max_nm");
  positive(pitch_kp, "pitch_kp");
  positive(pitch_ki, "pitch_ki");
  positive(pitch_rate_limit_deg_s, "pitch_rate_limit_deg_s");
  positive(pitch_max_deg, "pitch_max_deg");
  positive(rated_power_w, "rated_power_w");
  positive(rotor_speed_min_rads, "rotor_speed_min_rads");
  positive(rotor_speed_max_rads, "rotor_speed_max_rads");
  positive(ct_max, "ct_max");
  positive(lambda_star, "lambda_star");
  positive(beta_sensitivity, "beta_sensitivity");
  if (servo_substeps < 1) {
    throw std::invalid_argument("turbine params: servo_substeps must be >= 1");
  }
  if (rotor_speed_min_rads >= rotor_speed_max_rads) {
    throw std::invalid_argument("turbine params: rotor speed limits inverted");
  }
  const double area = kPi * rotor_radius_m * rotor_radius_m;
  if (std::abs(rotor_area_m2 - area) > 1e-9 * area) {
    throw std::invalid_argument(
        "turbine params: rotor_area_m2 inconsistent with rotor_radius_m");
  }
}

TurbineParams TurbineParams::with_radius(double rotor_radius_m) {
  TurbineParams p;
  p.rotor_radius_m = rotor_radius_m;
  p.rotor_area_m2 = kPi * rotor_radius_m * rotor_radius_m;
  return p;
}

double thrust(double ct_prime, double u_mps, const TurbineParams& params) {
  if (ct_prime < 0.0) {
    throw std::invalid_argument("thrust: negative thrust coefficient");
  }
  if (!(u_mps > 0.0)) {
    throw std::invalid_argument("thrust: wind speed must be positive");
  }
  return 0.5 * params.air_density * params.rotor_area_m2 * ct_prime * u_mps *
         u_mps;
}

double power(double ct_prime, double u_mps, const TurbineParams& params) {
  if (ct_prime < 0.0) {
    throw std::invalid_argument("power: negative thrust coefficient");
  }
  if (!(u_mps > 0.0)) {
    throw std::invalid_argument("power: wind speed must be positive");
  }
  return 0.5 * params.air_density * params.rotor_area_m2 * ct_prime * u_mps *
         u_mps * u_mps;
}

double ct_surface(double lambda, double beta_deg, const TurbineParams& params) {
  if (lambda < 0.0) throw std::invalid_argument("ct_surface: negative lambda");
  if (beta_deg < 0.0) throw std::invalid_argument("ct_surface: negative pitch");
  if (params.ct_table) {
    return std::clamp(params.ct_table->value(lambda, beta_deg), 0.0,
                      params.ct_max);
  }
  const double z = lambda / params.lambda_star;
  const double value = params.ct_max * z * std::exp(1.0 - z) *
                       std::exp(-params.beta_sensitivity * beta_deg);
  return std::clamp(value, 0.0, params.ct_max);
}

CtDemand required_ct(double p_target_w, double u_mps,
                     const TurbineParams& params) {
  if (p_target_w < 0.0) {
    throw std::invalid_argument("required_ct: negative power target");
  }
  if (!(u_mps > 0.0)) {
    throw std::invalid_argument("required_ct: wind speed must be positive");
  }
  const double denom =
      0.5 * params.air_density * params.rotor_area_m2 * u_mps * u_mps * u_mps;
  const double raw = p_target_w / denom;
  if (raw > params.ct_max) return {params.ct_max, true};
  return {raw, false};
}

double lambda_for_ct(double ct_prime, double beta_deg,
                     const TurbineParams& params) {
  if (ct_prime < 0.0) {
    throw std::invalid_argument("lambda_for_ct: negative thrust coefficient");
  }
  const double ceiling =
      params.ct_max * std::exp(-params.beta_sensitivity * beta_deg);
  const double target = ct_prime / ceiling;
  if (target >= 1.0) return params.lambda_star;
  if (target <= 0.0) return 0.0;
  // z * exp(1 - z) is strictly increasing on [0, 1]; bisect to machine
  // precision so repeated evaluations are bit-stable.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid * std::exp(1.0 - mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi) * params.lambda_star;
}

namespace {

void refresh_outputs(TurbineState* state, double u_mps,
                     const TurbineParams& params) {
  const double lambda = state->rotor_speed_rads * params.rotor_radius_m / u_mps;
  state->ct_prime = ct_surface(lambda, state->pitch_deg, params);
  state->thrust_n = thrust(state->ct_prime, u_mps, params);
  // P = F * u by construction keeps the Eq. (4)/Eq. (3) ratio exact.
  state->power_w = state->thrust_n * u_mps;
}

void check_state(const TurbineState& state, const TurbineParams& params) {
  const bool ok =
      std::isfinite(state.rotor_speed_rads) && std::isfinite(state.power_w) &&
      state.rotor_speed_rads >= params.rotor_speed_min_rads - 1e-12 &&
      state.rotor_speed_rads <= params.rotor_speed_max_rads + 1e-12 &&
      state.pitch_deg >= 0.0 && state.ct_prime >= 0.0 &&
      state.ct_prime <= params.ct_max + 1e-12 && state.thrust_n >= 0.0 &&
      state.power_w >= 0.0;
  if (!ok) throw std::logic_error("turbine servo: state invariants violated");
}

// The dispatched command already encodes the controller's first-order
// filter (the power signal is built from the filtered coefficient at the
// next step), so the ideal actuator realizes it by exact inversion: closed
// over the dispatch, the realized coefficient follows precisely the filter
// dynamics the prediction model assumes.
TurbineState step_ideal(const TurbineState& state, double p_command_w,
                        double u_mps, double dt_s,
                        const TurbineParams& params) {
  (void)dt_s;
  TurbineState next = state;
  const CtDemand demand = required_ct(p_command_w, u_mps, params);
  next.filter_state = demand.ct_prime;
  next.ct_prime = next.filter_state;
  next.thrust_n = thrust(next.ct_prime, u_mps, params);
  next.power_w = next.thrust_n * u_mps;
  next.saturated = demand.saturated;
  return next;
}

}  // namespace

TurbineState equilibrium_state(double p_command_w, double u_mps,
                               const TurbineParams& params) {
  params.validate();
  const CtDemand demand = required_ct(p_command_w, u_mps, params);
  TurbineState state;
  state.pitch_deg = 0.0;
  const double lambda = lambda_for_ct(demand.ct_prime, 0.0, params);
  state.rotor_speed_rads =
      std::clamp(lambda * u_mps / params.rotor_radius_m,
                 params.rotor_speed_min_rads, params.rotor_speed_max_rads);
  refresh_outputs(&state, u_mps, params);
  const double omega = std::max(state.rotor_speed_rads, kOmegaTorqueGuard);
  state.gen_torque_nm = state.power_w / omega / params.gearbox_ratio;
  state.torque_integrator_nm = state.gen_torque_nm;
  state.pitch_integrator_deg = 0.0;
  state.filter_state = state.ct_prime;
  state.saturated = demand.saturated;
  return state;
}

TurbineState step_servo(const TurbineState& state, double p_command_w,
                        double u_mps, double dt_s, const TurbineParams& params,
                        ServoFidelity fidelity) {
  if (!(u_mps > 0.0)) {
    throw std::invalid_argument("step_servo: wind speed must be positive");
  }
  if (p_command_w < 0.0) {
    throw std::invalid_argument("step_servo: negative power command");
  }
  if (dt_s <= 0.0) {
    throw std::invalid_argument("step_servo: dt must be positive");
  }
  if (fidelity == ServoFidelity::kIdealActuator) {
    return step_ideal(state, p_command_w, u_mps, dt_s, params);
  }

  TurbineState next = state;
  const double p_effective = std::min(p_command_w, params.rated_power_w);
  const CtDemand demand = required_ct(p_effective, u_mps, params);
  next.saturated = demand.saturated || p_command_w > params.rated_power_w;

  const double h = dt_s / params.servo_substeps;
  const double conv_alpha = 1.0 - std::exp(-h / params.converter_tau_s);
  for (int sub = 0; sub < params.servo_substeps; ++sub) {
    const double lambda =
        next.rotor_speed_rads * params.rotor_radius_m / u_mps;
    const double ct = ct_surface(lambda, next.pitch_deg, params);
    const double aero_power = power(ct, u_mps, params);
    const double omega = std::max(next.rotor_speed_rads, kOmegaTorqueGuard);
    const double aero_torque = aero_power / omega;

    // Speed reference from the commanded coefficient at the current pitch.
    const double lambda_target =
        lambda_for_ct(demand.ct_prime, next.pitch_deg, params);
    const double omega_raw = lambda_target * u_mps / params.rotor_radius_m;
    const double omega_ref =
        std::clamp(omega_raw, params.rotor_speed_min_rads,
                   params.rotor_speed_max_rads);

    // Pitch sheds power the torque path cannot deliver: a command above
    // rating, an over-speeding rotor, or a speed floor that blocks further
    // derating. Mode membership follows the command (plus an engaged-pitch
    // latch), so the shed PI settles at zero error instead of chattering
    // against a power threshold.
    const bool over_rated = p_command_w > params.rated_power_w;
    const bool over_speed =
        next.rotor_speed_rads > params.rotor_speed_max_rads - 1e-9;
    const bool floor_blocked =
        omega_raw < params.rotor_speed_min_rads &&
        (aero_power > p_effective || next.pitch_deg > 0.0);
    const double max_move = params.pitch_rate_limit_deg_s * h;
    if (over_rated || over_speed || floor_blocked) {
      double excess = (aero_power - p_effective) / params.rated_power_w;
      if (over_speed) {
        excess = std::max(excess, 5.0 *
                                      (next.rotor_speed_rads -
                                       0.999 * params.rotor_speed_max_rads) /
                                      params.rotor_speed_max_rads);
      }
      next.pitch_integrator_deg += params.pitch_ki * excess * h;
      next.pitch_integrator_deg =
          std::clamp(next.pitch_integrator_deg, 0.0, params.pitch_max_deg);
      const double beta_ref = std::clamp(
          params.pitch_kp * excess + next.pitch_integrator_deg, 0.0,
          params.pitch_max_deg);
      next.pitch_deg +=
          std::clamp(beta_ref - next.pitch_deg, -max_move, max_move);
    } else {
      // Relax toward zero pitch at the rate limit; bleed the integrator so
      // re-engagement starts fresh.
      next.pitch_deg = std::max(0.0, next.pitch_deg - max_move);
      next.pitch_integrator_deg =
          std::max(0.0, next.pitch_integrator_deg - params.pitch_ki * h);
    }

    // Speed PI on (omega - omega_ref): rotor too fast raises generator
    // torque. The integrator carries the torque balancing the aero load at
    // equilibrium. Clamping anti-windup.
    const double err = next.rotor_speed_rads - omega_ref;
    double torque_ref = params.torque_kp * err + next.torque_integrator_nm;
    if (torque_ref < 0.0 || torque_ref > params.gen_torque_max_nm) {
      torque_ref = std::clamp(torque_ref, 0.0, params.gen_torque_max_nm);
    } else {
      next.torque_integrator_nm += params.torque_ki * err * h;
    }
    next.gen_torque_nm += conv_alpha * (torque_ref - next.gen_torque_nm);

    const double domega =
        (aero_torque - params.gearbox_ratio * next.gen_torque_nm) /
        params.inertia_kgm2;
    next.rotor_speed_rads =
        std::clamp(next.rotor_speed_rads + h * domega,
                   params.rotor_speed_min_rads, params.rotor_speed_max_rads);
  }

  refresh_outputs(&next, u_mps, params);
  check_state(next, params);
  return next;
}

}  // namespace wfmpc
