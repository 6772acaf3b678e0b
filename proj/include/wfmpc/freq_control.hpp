// Farm-level power reference from the grid dispatch command plus droop and
// virtual-inertia response to measured frequency. This block works in MW;
// the caller converts to watts at the boundary.
#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace wfmpc {

struct FrequencyTrace {
  double dt_s = 1.0;
  std::vector<double> samples_hz;
  double nominal_hz = 50.0;

  void validate() const;
  static FrequencyTrace constant(double f_hz, double nominal_hz,
                                 std::size_t count, double dt_s);
  // Two-column CSV (time_s, freq_hz), uniform time steps.
  static FrequencyTrace from_csv(const std::filesystem::path& path,
                                 double nominal_hz);
  // Smooth deterministic +/-0.1 Hz excursion profile used when no PMU trace
  // is supplied.
  static FrequencyTrace synthetic_excursion(double nominal_hz,
                                            std::size_t count, double dt_s);
};

struct FreqCtrlParams {
  double droop_mw_per_hz = 50.0;       // K_D
  double inertia_mws_per_hz = 10.0;    // K_I
  double derivative_filter_s = 1.0;

  void validate() const;
};

// Backward difference passed through a first-order low-pass. The filter
// state is owned by whoever drives the loop.
class DerivativeFilter {
 public:
  explicit DerivativeFilter(double filter_time_s) : tau_s_(filter_time_s) {}

  // Feeds the next sample; returns the filtered derivative (0 until two
  // samples have been seen).
  double push(double sample, double dt_s);
  void reset();
  double value() const { return state_; }

 private:
  double tau_s_ = 1.0;
  double state_ = 0.0;
  double prev_sample_ = 0.0;
  int samples_seen_ = 0;
};

// Filtered derivative of a sample window (>= 2 samples), evaluated at the
// window end.
double derivative_estimate(std::span<const double> samples, double dt_s,
                           double filter_time_s);

// P_ref = p_command + K_D (f0 - f) + K_I d(f0 - f)/dt, clamped below at 0.
// The window holds the most recent measured-frequency samples.
double power_reference(double p_command_mw,
                       std::span<const double> f_window_hz, double nominal_hz,
                       const FreqCtrlParams& params, double dt_s);

// Streaming equivalent of power_reference for the scenario loop.
class FrequencyController {
 public:
  FrequencyController(FreqCtrlParams params, double nominal_hz)
      : params_(params), nominal_hz_(nominal_hz),
        filter_(params.derivative_filter_s) {
    params_.validate();
  }

  double step(double p_command_mw, double f_measured_hz, double dt_s);
  void reset() { filter_.reset(); }

 private:
  FreqCtrlParams params_;
  double nominal_hz_ = 50.0;
  DerivativeFilter filter_;
};

}  // namespace wfmpc
