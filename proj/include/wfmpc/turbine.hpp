// Per-turbine aerodynamics and the power-command servo: a speed PI loop
// produces the generator torque reference through a first-order converter
// lag, a single-mass model drives the rotor, and a pitch loop sheds power
// the torque path cannot (above rating or at the rotor-speed floor).
#pragma once

#include <filesystem>
#include <memory>
#include <vector>

namespace wfmpc {

// Optional C_T'(lambda, beta) lookup table: CSV grid with a header row of
// beta values (first cell ignored) and a first column of lambda values;
// bilinear interpolation, clamped at the grid edges.
class CtTable {
 public:
  static CtTable from_csv(const std::filesystem::path& path);
  double value(double lambda, double beta_deg) const;

 private:
  std::vector<double> lambdas_;
  std::vector<double> betas_;
  std::vector<std::vector<double>> values_;  // [lambda][beta]
};

struct TurbineParams {
  double air_density = 1.2;         // kg/m^3
  double rotor_radius_m = 63.0;
  double rotor_area_m2 = 12468.981242097889;  // pi * r^2
  double inertia_kgm2 = 4.0e7;      // equivalent single-mass inertia
  double gearbox_ratio = 97.0;
  // Speed loop tuned to settle in about 2 s so the rotor realizes commands
  // well inside the controller's 5 s filter model.
  double torque_kp = 2.6e6;         // generator-side N*m per rad/s
  double torque_ki = 2.5e6;
  double converter_tau_s = 0.1;
  // Generator-side ceiling; the coefficient surface puts derated operating
  // points at low tip-speed ratios where the balancing torque is large.
  double gen_torque_max_nm = 1.0e6;
  double pitch_kp = 15.0;           // deg per unit normalized power excess
  double pitch_ki = 8.0;
  double pitch_rate_limit_deg_s = 8.0;
  double pitch_max_deg = 45.0;
  double rated_power_w = 5.0e6;
  double rotor_speed_min_rads = 0.01;
  double rotor_speed_max_rads = 1.9;
  // Analytic thrust-coefficient surface: peak value, peak tip-speed ratio,
  // and pitch sensitivity (1/deg).
  double ct_max = 2.0;
  double lambda_star = 8.0;
  double beta_sensitivity = 0.08;
  int servo_substeps = 20;
  std::shared_ptr<const CtTable> ct_table;  // overrides the analytic surface

  void validate() const;
  static TurbineParams with_radius(double rotor_radius_m);
};

struct TurbineState {
  double rotor_speed_rads = 0.0;
  double pitch_deg = 0.0;
  double ct_prime = 0.0;
  double thrust_n = 0.0;
  double power_w = 0.0;
  double gen_torque_nm = 0.0;        // after the converter lag
  double torque_integrator_nm = 0.0;
  double pitch_integrator_deg = 0.0;
  double filter_state = 0.0;         // ideal-actuator C_T' state
  bool saturated = false;            // command exceeded available power
};

enum class ServoFidelity { kFullServo, kIdealActuator };

// F = 1/2 rho A C_T' u^2
double thrust(double ct_prime, double u_mps, const TurbineParams& params);
// P = 1/2 rho A C_T' u^3
double power(double ct_prime, double u_mps, const TurbineParams& params);

// Analytic surface ct_max * (l/l*) * exp(1 - l/l*) * exp(-c_beta * beta),
// clamped to [0, ct_max]; replaced by the lookup table when one is loaded.
double ct_surface(double lambda, double beta_deg, const TurbineParams& params);

struct CtDemand {
  double ct_prime = 0.0;
  bool saturated = false;
};

// Thrust coefficient that delivers p_target at wind speed u, clamped to
// [0, ct_max]; the flag reports clamping.
CtDemand required_ct(double p_target_w, double u_mps,
                     const TurbineParams& params);

// Rising-branch inverse of the analytic surface at fixed pitch: the smallest
// lambda in [0, lambda_star] with ct_surface(lambda, beta) = ct_prime
// (lambda_star when the target is unreachable at this pitch).
double lambda_for_ct(double ct_prime, double beta_deg,
                     const TurbineParams& params);

// Exact steady state for a constant power command and wind speed (pitch at
// zero, speed loop settled). Used to start runs from stabilized operation.
TurbineState equilibrium_state(double p_command_w, double u_mps,
                               const TurbineParams& params);

// Advances one control period dt (internally sub-stepped).
TurbineState step_servo(const TurbineState& state, double p_command_w,
                        double u_mps, double dt_s, const TurbineParams& params,
                        ServoFidelity fidelity = ServoFidelity::kFullServo);

}  // namespace wfmpc
