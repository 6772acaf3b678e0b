// Freestream turbulence synthesis and a delayed actuator-disk wake surrogate.
// Upstream thrust lowers downstream rotor-effective speed with a transport
// delay; deficits combine by root-sum-square and the combined factor is
// smoothed by a first-order lag.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace wfmpc {

struct FarmLayout {
  std::vector<Eigen::Vector2d> positions_m;
  double rotor_diameter_m = 126.0;
  // 0 deg = flow along +x. Arbitrary directions are handled by projecting
  // positions onto the flow axis.
  double wind_direction_deg = 0.0;
  double wake_decay = 0.05;            // Jensen expansion constant
  double advection_smoothing_s = 5.0;  // first-order lag on the wake factor

  std::size_t turbine_count() const { return positions_m.size(); }
  void validate() const;

  // n turbines in a single streamwise column at the given spacing.
  static FarmLayout column(std::size_t n, double spacing_diameters,
                           double rotor_diameter_m);
};

struct FreestreamTrace {
  double dt_s = 1.0;
  std::vector<double> samples_mps;
  double mean_mps = 0.0;
  double turbulence_intensity = 0.0;
  std::uint64_t seed = 0;

  double duration_s() const { return dt_s * static_cast<double>(samples_mps.size()); }
  void validate() const;

  // Two-column CSV (time_s, speed_mps); times must be uniformly spaced.
  static FreestreamTrace from_csv(const std::filesystem::path& path);
};

// AR(1)-colored multiplicative perturbation around `mean` with stationary
// relative standard deviation `sigma`. Deterministic per seed.
FreestreamTrace synth_freestream(double mean_mps, double sigma,
                                 std::uint64_t seed, double duration_s,
                                 double dt_s, double correlation_s = 30.0);

// Actuator-disk induction from the local thrust coefficient,
// inverting C_T' = 4a / (1 - a).
double induction_factor(double ct_prime);

// Jensen top-hat velocity deficit fraction at streamwise distance x.
double wake_deficit(double induction, double x_m, double rotor_diameter_m,
                    double wake_decay);

// Closed-form steady-state rotor-effective speeds for constant inputs
// (no transport delay, no smoothing).
std::vector<double> jensen_steady_speeds(const FarmLayout& layout,
                                         const std::vector<double>& ct_prime,
                                         double freestream_mps);

// Time-stepped wake field. One instance is owned by one scenario loop and
// advances strictly sequentially.
class FlowField {
 public:
  // reference_advection_mps sizes the delay lines (lag in samples is
  // ceil(distance / (reference speed * dt))); the read lag follows the
  // current freestream sample, clamped to the stored history.
  FlowField(FarmLayout layout, double dt_s, double reference_advection_mps);

  // Seeds delay lines and smoothing states with the steady field for
  // (ct_prime, freestream), so a run starts from a stabilized wake.
  void reset(const std::vector<double>& ct_prime, double freestream_mps);

  // Advances one dt: reads lagged deficits, combines, smooths, then pushes
  // deficits computed from the current ct vector.
  const std::vector<double>& step(const std::vector<double>& ct_prime,
                                  double freestream_mps);

  const std::vector<double>& speeds() const { return speeds_; }
  const FarmLayout& layout() const { return layout_; }
  double dt() const { return dt_s_; }

  // Times the combined deficit had to be clamped below 1.
  long clamp_count() const { return clamp_count_; }

  // Longest delay-line length, in samples (0 for an uncoupled farm).
  int max_delay_samples() const { return max_delay_; }

 private:
  struct WakePair {
    std::size_t upstream = 0;
    std::size_t downstream = 0;
    double distance_m = 0.0;
    int length = 1;               // delay-line capacity in samples
    std::vector<double> buffer;   // ring of deficit fractions
    int head = 0;                 // next write slot
  };

  FarmLayout layout_;
  double dt_s_ = 1.0;
  double reference_advection_mps_ = 9.0;
  std::vector<WakePair> pairs_;
  std::vector<double> factor_;  // smoothed (1 - combined deficit) per turbine
  std::vector<double> speeds_;
  long clamp_count_ = 0;
  int max_delay_ = 0;
};

}  // namespace wfmpc
