#include "wfmpc/freq_control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wfmpc/csv.hpp"

namespace wfmpc {

void FrequencyTrace::validate() const {
  if (dt_s <= 0.0) throw std::invalid_argument("frequency: dt must be positive");
  if (samples_hz.empty()) throw std::invalid_argument("frequency: empty trace");
  for (double f : samples_hz) {
    if (f < nominal_hz - 2.0 || f > nominal_hz + 2.0) {
      throw std::invalid_argument(
          "frequency: sample outside nominal +/- 2 Hz plausibility band");
    }
  }
}

FrequencyTrace FrequencyTrace::constant(double f_hz, double nominal_hz,
                                        std::size_t count, double dt_s) {
  FrequencyTrace trace;
  trace.dt_s = dt_s;
  trace.nominal_hz = nominal_hz;
  trace.samples_hz.assign(count, f_hz);
  trace.validate();
  return trace;
}

FrequencyTrace FrequencyTrace::from_csv(const std::filesystem::path& path,
                                        double nominal_hz) {
  const auto table = csv::read_table(path);
  if (table.column_count() < 2) {
    throw std::runtime_error("frequency csv: need (time_s, freq_hz) columns");
  }
  if (table.row_count() < 2) {
    throw std::runtime_error("frequency csv: need at least 2 rows");
  }
  FrequencyTrace trace;
  trace.nominal_hz = nominal_hz;
  trace.dt_s = table.rows[1][0] - table.rows[0][0];
  if (trace.dt_s <= 0.0) {
    throw std::runtime_error("frequency csv: non-increasing time column");
  }
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    trace.samples_hz.push_back(table.rows[r][1]);
  }
  trace.validate();
  return trace;
}

FrequencyTrace FrequencyTrace::synthetic_excursion(double nominal_hz,
                                                   std::size_t count,
                                                   double dt_s) {
  FrequencyTrace trace;
  trace.dt_s = dt_s;
  trace.nominal_hz = nominal_hz;
  trace.samples_hz.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * dt_s;
    // Slow wander plus a faster ripple, bounded by +/-0.1 Hz.
    const double dev = 0.06 * std::sin(2.0 * M_PI * t / 210.0) +
                       0.04 * std::sin(2.0 * M_PI * t / 67.0 + 1.3);
    trace.samples_hz.push_back(nominal_hz + dev);
  }
  trace.validate();
  return trace;
}

void FreqCtrlParams::validate() const {
  if (droop_mw_per_hz < 0.0 || inertia_mws_per_hz < 0.0) {
    throw std::invalid_argument("freq control: gains must be non-negative");
  }
  if (derivative_filter_s < 0.0) {
    throw std::invalid_argument("freq control: filter time must be non-negative");
  }
}

double DerivativeFilter::push(double sample, double dt_s) {
  if (dt_s <= 0.0) {
    throw std::invalid_argument("derivative filter: dt must be positive");
  }
  if (samples_seen_ == 0) {
    prev_sample_ = sample;
    samples_seen_ = 1;
    state_ = 0.0;
    return state_;
  }
  const double raw = (sample - prev_sample_) / dt_s;
  prev_sample_ = sample;
  if (samples_seen_ == 1) {
    // Prime on the first difference so a clean ramp reads exactly.
    state_ = raw;
  } else {
    const double alpha = tau_s_ > 0.0 ? 1.0 - std::exp(-dt_s / tau_s_) : 1.0;
    state_ += alpha * (raw - state_);
  }
  ++samples_seen_;
  return state_;
}

void DerivativeFilter::reset() {
  state_ = 0.0;
  prev_sample_ = 0.0;
  samples_seen_ = 0;
}

double derivative_estimate(std::span<const double> samples, double dt_s,
                           double filter_time_s) {
  if (samples.size() < 2) {
    throw std::invalid_argument("derivative_estimate: need at least 2 samples");
  }
  DerivativeFilter filter(filter_time_s);
  double value = 0.0;
  for (double s : samples) value = filter.push(s, dt_s);
  return value;
}

double power_reference(double p_command_mw,
                       std::span<const double> f_window_hz, double nominal_hz,
                       const FreqCtrlParams& params, double dt_s) {
  params.validate();
  if (f_window_hz.empty()) {
    throw std::invalid_argument("power_reference: empty frequency window");
  }
  const double delta_f = nominal_hz - f_window_hz.back();
  double deviation_rate = 0.0;
  if (f_window_hz.size() >= 2) {
    std::vector<double> deviation(f_window_hz.size());
    for (std::size_t k = 0; k < f_window_hz.size(); ++k) {
      deviation[k] = nominal_hz - f_window_hz[k];
    }
    deviation_rate =
        derivative_estimate(deviation, dt_s, params.derivative_filter_s);
  }
  const double p_ref = p_command_mw + params.droop_mw_per_hz * delta_f +
                       params.inertia_mws_per_hz * deviation_rate;
  return std::max(p_ref, 0.0);
}

double FrequencyController::step(double p_command_mw, double f_measured_hz,
                                 double dt_s) {
  const double delta_f = nominal_hz_ - f_measured_hz;
  const double deviation_rate = filter_.push(delta_f, dt_s);
  const double p_ref = p_command_mw + params_.droop_mw_per_hz * delta_f +
                       params_.inertia_mws_per_hz * deviation_rate;
  return std::max(p_ref, 0.0);
}

}  // namespace wfmpc
