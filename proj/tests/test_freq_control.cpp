#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "wfmpc/freq_control.hpp"

using wfmpc::DerivativeFilter;
using wfmpc::FreqCtrlParams;
using wfmpc::FrequencyController;
using wfmpc::FrequencyTrace;
using wfmpc::derivative_estimate;
using wfmpc::power_reference;

TEST_CASE("derivative estimate") {
  std::vector<double> constant(50, 50.0);
  CHECK(derivative_estimate(constant, 1.0, 1.0) == 0.0);

  // Exact ramp: slope recovered to machine precision after settling.
  std::vector<double> ramp(200);
  for (std::size_t k = 0; k < ramp.size(); ++k) {
    ramp[k] = 50.0 + 0.01 * static_cast<double>(k);
  }
  CHECK(derivative_estimate(ramp, 1.0, 1.0) ==
        doctest::Approx(0.01).epsilon(1e-6));

  // Bounded white noise: the filter output is a convex combination of raw
  // differences, each bounded by 2 eps / dt.
  const double eps = 0.01;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-eps, eps);
  std::vector<double> noise(500);
  for (auto& v : noise) v = 50.0 + dist(rng);
  const double out = derivative_estimate(noise, 1.0, 1.0);
  CHECK(std::abs(out) <= 2.0 * eps / 1.0);

  CHECK_THROWS(derivative_estimate(std::vector<double>{50.0}, 1.0, 1.0));
}

TEST_CASE("power reference direct evaluation") {
  FreqCtrlParams params;  // K_D = 50, K_I = 10
  // Flat frequency at nominal: pass-through.
  std::vector<double> flat(10, 50.0);
  CHECK(power_reference(100.0, flat, 50.0, params, 1.0) == 100.0);

  // Delta f = 0.1 held, no rate after settling: 100 + 50 * 0.1.
  std::vector<double> offset(300, 49.9);
  CHECK(power_reference(100.0, offset, 50.0, params, 1.0) ==
        doctest::Approx(105.0).epsilon(1e-9));

  // Hand evaluation with both terms: 100 + 50 * 0.1 + 10 * 0.02 = 105.2.
  // A ramp of the deviation at +0.02 Hz/s ending at deviation 0.1.
  std::vector<double> window(400);
  for (std::size_t k = 0; k < window.size(); ++k) {
    const double t = static_cast<double>(k);
    const double deviation =
        0.1 + 0.02 * (t - static_cast<double>(window.size() - 1));
    window[k] = 50.0 - deviation;
  }
  CHECK(power_reference(100.0, window, 50.0, params, 1.0) ==
        doctest::Approx(105.2).epsilon(1e-6));

  // Under-frequency ramp at -0.02 Hz/s crossing nominal at the evaluation
  // instant: inertia term only, +0.2 MW.
  std::vector<double> ramp(400);
  for (std::size_t k = 0; k < ramp.size(); ++k) {
    const double t = static_cast<double>(k);
    ramp[k] = 50.0 - 0.02 * (t - static_cast<double>(ramp.size() - 1));
  }
  CHECK(power_reference(100.0, ramp, 50.0, params, 1.0) ==
        doctest::Approx(100.2).epsilon(1e-6));

  CHECK_THROWS(power_reference(100.0, std::vector<double>{}, 50.0, params, 1.0));
}

TEST_CASE("power reference linearity and zero-gain pass-through") {
  FreqCtrlParams params;
  std::vector<double> w1(100), w2(100), w12(100);
  for (std::size_t k = 0; k < 100; ++k) {
    const double t = static_cast<double>(k);
    const double d1 = 0.02 * std::sin(0.1 * t);
    const double d2 = -0.03 + 0.0005 * t;
    w1[k] = 50.0 - d1;
    w2[k] = 50.0 - d2;
    w12[k] = 50.0 - (d1 + d2);
  }
  // Evaluate inside the positive region; the clamp at zero is checked
  // separately.
  const double p1 = power_reference(50.0, w1, 50.0, params, 1.0);
  const double p2 = power_reference(50.0, w2, 50.0, params, 1.0);
  const double p12 = power_reference(50.0, w12, 50.0, params, 1.0);
  CHECK(p12 == doctest::Approx(p1 + p2 - 50.0).epsilon(1e-9));

  FreqCtrlParams zero;
  zero.droop_mw_per_hz = 0.0;
  zero.inertia_mws_per_hz = 0.0;
  CHECK(power_reference(123.0, w12, 50.0, zero, 1.0) == 123.0);
}

TEST_CASE("streaming controller equals the windowed evaluation") {
  FreqCtrlParams params;
  FrequencyController ctrl(params, 50.0);
  std::vector<double> window;
  for (int k = 0; k < 200; ++k) {
    const double f =
        50.0 + 0.05 * std::sin(0.07 * k) - 0.02 * std::cos(0.013 * k);
    window.push_back(f);
    const double streamed = ctrl.step(80.0, f, 1.0);
    const double batch = power_reference(80.0, window, 50.0, params, 1.0);
    CHECK(streamed == doctest::Approx(batch).epsilon(1e-12));
  }
}

TEST_CASE("reference clamps at zero") {
  FreqCtrlParams params;
  std::vector<double> high(50, 51.5);  // over-frequency, big droop cut
  CHECK(power_reference(10.0, high, 50.0, params, 1.0) == 0.0);
}

TEST_CASE("frequency trace plausibility guard") {
  FrequencyTrace trace;
  trace.dt_s = 1.0;
  trace.nominal_hz = 50.0;
  trace.samples_hz = {50.0, 49.9, 53.0};
  CHECK_THROWS(trace.validate());
  trace.samples_hz = {50.0, 49.9, 50.1};
  CHECK_NOTHROW(trace.validate());

  const auto synthetic = FrequencyTrace::synthetic_excursion(50.0, 900, 1.0);
  CHECK_NOTHROW(synthetic.validate());
  for (double f : synthetic.samples_hz) {
    CHECK(std::abs(f - 50.0) <= 0.1 + 1e-12);
  }
}

TEST_CASE("derivative filter streaming state") {
  DerivativeFilter filter(2.0);
  CHECK(filter.push(50.0, 1.0) == 0.0);
  const double first = filter.push(50.1, 1.0);
  CHECK(first == doctest::Approx(0.1).epsilon(1e-12));
  filter.reset();
  CHECK(filter.value() == 0.0);
}
