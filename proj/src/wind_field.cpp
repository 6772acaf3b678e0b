#include "wfmpc/wind_field.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "wfmpc/csv.hpp"

namespace wfmpc {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

// Streamwise/lateral coordinates of a position for a given wind direction.
std::pair<double, double> flow_coordinates(const Eigen::Vector2d& p,
                                           double direction_deg) {
  const double c = std::cos(direction_deg * kDegToRad);
  const double s = std::sin(direction_deg * kDegToRad);
  return {p.x() * c + p.y() * s, -p.x() * s + p.y() * c};
}

}  // namespace

void FarmLayout::validate() const {
  if (positions_m.empty()) {
    throw std::invalid_argument("layout: no turbine positions");
  }
  if (rotor_diameter_m <= 0.0) {
    throw std::invalid_argument("layout: rotor diameter must be positive");
  }
  if (wake_decay <= 0.0) {
    throw std::invalid_argument("layout: wake decay constant must be positive");
  }
  if (advection_smoothing_s < 0.0) {
    throw std::invalid_argument("layout: smoothing time must be non-negative");
  }
  for (std::size_t i = 0; i < positions_m.size(); ++i) {
    for (std::size_t j = i + 1; j < positions_m.size(); ++j) {
      if ((positions_m[i] - positions_m[j]).norm() < 1e-9) {
        throw std::invalid_argument("layout: duplicate turbine positions");
      }
    }
  }
}

FarmLayout FarmLayout::column(std::size_t n, double spacing_diameters,
                              double rotor_diameter_m) {
  FarmLayout layout;
  layout.rotor_diameter_m = rotor_diameter_m;
  layout.positions_m.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    layout.positions_m.emplace_back(
        spacing_diameters * rotor_diameter_m * static_cast<double>(i), 0.0);
  }
  return layout;
}

void FreestreamTrace::validate() const {
  if (dt_s <= 0.0) throw std::invalid_argument("freestream: dt must be positive");
  if (samples_mps.empty()) {
    throw std::invalid_argument("freestream: empty trace");
  }
  for (double u : samples_mps) {
    if (!(u > 0.0)) {
      throw std::invalid_argument("freestream: non-positive sample");
    }
  }
}

FreestreamTrace FreestreamTrace::from_csv(const std::filesystem::path& path) {
  const auto table = csv::read_table(path);
  if (table.column_count() < 2) {
    throw std::runtime_error("freestream csv: need (time_s, speed_mps) columns");
  }
  if (table.row_count() < 2) {
    throw std::runtime_error("freestream csv: need at least 2 rows");
  }
  FreestreamTrace trace;
  trace.dt_s = table.rows[1][0] - table.rows[0][0];
  if (trace.dt_s <= 0.0) {
    throw std::runtime_error("freestream csv: non-increasing time column");
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    if (r + 1 < table.row_count()) {
      const double step = table.rows[r + 1][0] - table.rows[r][0];
      if (std::abs(step - trace.dt_s) > 1e-6 * trace.dt_s) {
        throw std::runtime_error("freestream csv: non-uniform time steps");
      }
    }
    trace.samples_mps.push_back(table.rows[r][1]);
    sum += table.rows[r][1];
  }
  trace.mean_mps = sum / static_cast<double>(trace.samples_mps.size());
  trace.validate();
  return trace;
}

FreestreamTrace synth_freestream(double mean_mps, double sigma,
                                 std::uint64_t seed, double duration_s,
                                 double dt_s, double correlation_s) {
  if (mean_mps <= 0.0) {
    throw std::invalid_argument("synth_freestream: mean must be positive");
  }
  if (sigma < 0.0) {
    throw std::invalid_argument("synth_freestream: sigma must be non-negative");
  }
  if (duration_s <= 0.0 || dt_s <= 0.0) {
    throw std::invalid_argument("synth_freestream: duration and dt must be positive");
  }
  if (correlation_s <= 0.0) {
    throw std::invalid_argument("synth_freestream: correlation time must be positive");
  }
  const auto count =
      static_cast<std::size_t>(std::llround(duration_s / dt_s));
  if (count == 0) {
    throw std::invalid_argument("synth_freestream: duration shorter than dt");
  }

  FreestreamTrace trace;
  trace.dt_s = dt_s;
  trace.mean_mps = mean_mps;
  trace.turbulence_intensity = sigma;
  trace.seed = seed;
  trace.samples_mps.reserve(count);

  // Unit-variance AR(1): g <- phi g + sqrt(1 - phi^2) eps keeps the
  // stationary relative std exactly sigma for any correlation time.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double phi = std::exp(-dt_s / correlation_s);
  const double drive = std::sqrt(1.0 - phi * phi);
  double g = gauss(rng);
  for (std::size_t k = 0; k < count; ++k) {
    if (k > 0) g = phi * g + drive * gauss(rng);
    const double u = mean_mps * (1.0 + sigma * g);
    trace.samples_mps.push_back(std::max(u, 0.01 * mean_mps));
  }
  return trace;
}

double induction_factor(double ct_prime) {
  if (ct_prime < 0.0) {
    throw std::invalid_argument("induction_factor: negative thrust coefficient");
  }
  return ct_prime / (4.0 + ct_prime);
}

double wake_deficit(double induction, double x_m, double rotor_diameter_m,
                    double wake_decay) {
  if (induction < 0.0 || induction >= 1.0) {
    throw std::invalid_argument("wake_deficit: induction outside [0, 1)");
  }
  if (x_m < 0.0) throw std::invalid_argument("wake_deficit: negative distance");
  if (rotor_diameter_m <= 0.0 || wake_decay <= 0.0) {
    throw std::invalid_argument("wake_deficit: non-positive diameter or decay");
  }
  const double ratio =
      rotor_diameter_m / (rotor_diameter_m + 2.0 * wake_decay * x_m);
  return 2.0 * induction * ratio * ratio;
}

std::vector<double> jensen_steady_speeds(const FarmLayout& layout,
                                         const std::vector<double>& ct_prime,
                                         double freestream_mps) {
  layout.validate();
  const std::size_t n = layout.turbine_count();
  if (ct_prime.size() != n) {
    throw std::invalid_argument("jensen_steady_speeds: ct size mismatch");
  }
  std::vector<double> speeds(n, freestream_mps);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [si, li] =
        flow_coordinates(layout.positions_m[i], layout.wind_direction_deg);
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto [sj, lj] =
          flow_coordinates(layout.positions_m[j], layout.wind_direction_deg);
      const double dx = si - sj;
      if (dx <= 0.0) continue;
      if (std::abs(li - lj) >= layout.rotor_diameter_m) continue;
      const double d = wake_deficit(induction_factor(ct_prime[j]), dx,
                                    layout.rotor_diameter_m, layout.wake_decay);
      sum_sq += d * d;
    }
    const double combined = std::min(std::sqrt(sum_sq), 1.0 - 1e-3);
    speeds[i] = freestream_mps * (1.0 - combined);
  }
  return speeds;
}

FlowField::FlowField(FarmLayout layout, double dt_s,
                     double reference_advection_mps)
    : layout_(std::move(layout)),
      dt_s_(dt_s),
      reference_advection_mps_(reference_advection_mps) {
  layout_.validate();
  if (dt_s_ <= 0.0) throw std::invalid_argument("flow field: dt must be positive");
  if (reference_advection_mps_ <= 0.0) {
    throw std::invalid_argument("flow field: reference advection speed must be positive");
  }
  const std::size_t n = layout_.turbine_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto [si, li] =
        flow_coordinates(layout_.positions_m[i], layout_.wind_direction_deg);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto [sj, lj] =
          flow_coordinates(layout_.positions_m[j], layout_.wind_direction_deg);
      const double dx = si - sj;
      if (dx <= 0.0) continue;
      if (std::abs(li - lj) >= layout_.rotor_diameter_m) continue;
      WakePair pair;
      pair.upstream = j;
      pair.downstream = i;
      pair.distance_m = dx;
      pair.length = std::max(
          1, static_cast<int>(
                 std::ceil(dx / (reference_advection_mps_ * dt_s_))));
      pair.buffer.assign(static_cast<std::size_t>(pair.length), 0.0);
      max_delay_ = std::max(max_delay_, pair.length);
      pairs_.push_back(std::move(pair));
    }
  }
  factor_.assign(n, 1.0);
  speeds_.assign(n, reference_advection_mps_);
}

void FlowField::reset(const std::vector<double>& ct_prime,
                      double freestream_mps) {
  const std::size_t n = layout_.turbine_count();
  if (ct_prime.size() != n) {
    throw std::invalid_argument("flow field: ct vector size mismatch");
  }
  if (freestream_mps <= 0.0) {
    throw std::invalid_argument("flow field: freestream must be positive");
  }
  for (auto& pair : pairs_) {
    const double d =
        wake_deficit(induction_factor(ct_prime[pair.upstream]), pair.distance_m,
                     layout_.rotor_diameter_m, layout_.wake_decay);
    std::fill(pair.buffer.begin(), pair.buffer.end(), d);
    pair.head = 0;
  }
  const auto steady = jensen_steady_speeds(layout_, ct_prime, freestream_mps);
  for (std::size_t i = 0; i < n; ++i) factor_[i] = steady[i] / freestream_mps;
  speeds_ = steady;
  clamp_count_ = 0;
}

const std::vector<double>& FlowField::step(const std::vector<double>& ct_prime,
                                           double freestream_mps) {
  const std::size_t n = layout_.turbine_count();
  if (ct_prime.size() != n) {
    throw std::invalid_argument("flow field: ct vector size mismatch");
  }
  if (freestream_mps <= 0.0) {
    throw std::invalid_argument("flow field: freestream must be positive");
  }

  // Read lag follows the current freestream (frozen-turbulence transport),
  // clamped to the history each delay line actually holds.
  std::vector<double> sum_sq(n, 0.0);
  for (auto& pair : pairs_) {
    int lag = static_cast<int>(
        std::ceil(pair.distance_m / (freestream_mps * dt_s_)));
    lag = std::clamp(lag, 1, pair.length);
    const int idx =
        (pair.head - lag + pair.length * 2) % pair.length;  // pushed `lag` ago
    const double d = pair.buffer[static_cast<std::size_t>(idx)];
    sum_sq[pair.downstream] += d * d;
  }

  const double alpha =
      layout_.advection_smoothing_s > 0.0
          ? 1.0 - std::exp(-dt_s_ / layout_.advection_smoothing_s)
          : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double combined = std::sqrt(sum_sq[i]);
    if (combined >= 1.0) {
      combined = 1.0 - 1e-3;
      ++clamp_count_;
    }
    const double target = 1.0 - combined;
    factor_[i] += alpha * (target - factor_[i]);
    speeds_[i] = freestream_mps * factor_[i];
  }

  // Push deficits computed from the current thrust coefficients.
  for (auto& pair : pairs_) {
    const double d =
        wake_deficit(induction_factor(ct_prime[pair.upstream]), pair.distance_m,
                     layout_.rotor_diameter_m, layout_.wake_decay);
    pair.buffer[static_cast<std::size_t>(pair.head)] = d;
    pair.head = (pair.head + 1) % pair.length;
  }
  return speeds_;
}

}  // namespace wfmpc
