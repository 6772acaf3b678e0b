#include <doctest.h>

#include <cmath>
#include <random>

#include "wfmpc/metrics.hpp"

using wfmpc::metrics::dynamic_fatigue;
using wfmpc::metrics::equalization;
using wfmpc::metrics::normalize;
using wfmpc::metrics::rms_error;

namespace {

// Independent recomputation of the criteria, written directly from the
// formulas: per-turbine RMS of step differences over T, and RMS deviation
// from the per-sample cross-turbine mean over T.
double oracle_df(const Eigen::MatrixXd& f, int i) {
  double acc = 0.0;
  for (int t = 1; t < f.rows(); ++t) {
    const double d = f(t, i) - f(t - 1, i);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(f.rows()));
}

double oracle_ef(const Eigen::MatrixXd& f, int i) {
  double acc = 0.0;
  for (int t = 0; t < f.rows(); ++t) {
    double mean = 0.0;
    for (int j = 0; j < f.cols(); ++j) mean += f(t, j);
    mean /= static_cast<double>(f.cols());
    const double d = f(t, i) - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(f.rows()));
}

Eigen::MatrixXd random_series(int t, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(1e4, 8e5);
  Eigen::MatrixXd f(t, n);
  for (int r = 0; r < t; ++r) {
    for (int c = 0; c < n; ++c) f(r, c) = dist(rng);
  }
  return f;
}

}  // namespace

TEST_CASE("dynamic fatigue examples") {
  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(50, 3, 4.2e5);
  auto [df_i, df] = dynamic_fatigue(constant);
  for (double v : df_i) CHECK(v == 0.0);
  CHECK(df == 0.0);

  Eigen::MatrixXd two(2, 1);
  two << 0.0, 3.0;
  auto [df2_i, df2] = dynamic_fatigue(two);
  CHECK(df2 == doctest::Approx(std::sqrt(9.0 / 2.0)).epsilon(1e-12));
  CHECK(df2_i[0] == df2);

  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  CHECK_THROWS(dynamic_fatigue(one));
}

TEST_CASE("dynamic fatigue matches brute-force recomputation exactly") {
  const Eigen::MatrixXd f = random_series(400, 5, 99);
  auto [df_i, df] = dynamic_fatigue(f);
  double total = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double expect = oracle_df(f, i);
    CHECK(df_i[static_cast<std::size_t>(i)] == expect);
    total += expect;
  }
  CHECK(df == total);
}

TEST_CASE("equalization examples") {
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(20, 4, 1.0e5);
  auto [ef_i, ef] = equalization(same);
  for (double v : ef_i) CHECK(v == 0.0);
  CHECK(ef == 0.0);

  Eigen::MatrixXd pair(10, 2);
  pair.col(0).setConstant(2.0);
  pair.col(1).setConstant(4.0);
  auto [efp_i, efp] = equalization(pair);
  CHECK(efp_i[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(efp_i[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(efp == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("equalization matches brute force and is permutation invariant") {
  const Eigen::MatrixXd f = random_series(300, 4, 7);
  auto [ef_i, ef] = equalization(f);
  for (int i = 0; i < 4; ++i) {
    CHECK(ef_i[static_cast<std::size_t>(i)] == oracle_ef(f, i));
  }
  Eigen::MatrixXd permuted(f.rows(), f.cols());
  const int perm[4] = {2, 0, 3, 1};
  for (int i = 0; i < 4; ++i) permuted.col(i) = f.col(perm[i]);
  auto [efp_i, efp] = equalization(permuted);
  CHECK(efp == doctest::Approx(ef).epsilon(1e-12));
  for (int i = 0; i < 4; ++i) {
    CHECK(efp_i[static_cast<std::size_t>(i)] ==
          doctest::Approx(ef_i[static_cast<std::size_t>(perm[i])])
              .epsilon(1e-12));
  }
}

TEST_CASE("metric scale and shift properties") {
  const Eigen::MatrixXd f = random_series(200, 3, 11);
  auto [df_i, df] = dynamic_fatigue(f);
  auto [ef_i, ef] = equalization(f);

  // Scaling by a power of two is exact in floating point.
  auto [df2_i, df2] = dynamic_fatigue((2.0 * f).eval());
  auto [ef2_i, ef2] = equalization((2.0 * f).eval());
  CHECK(df2 == 2.0 * df);
  CHECK(ef2 == 2.0 * ef);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(df2_i[i] == 2.0 * df_i[i]);
    CHECK(ef2_i[i] == 2.0 * ef_i[i]);
  }

  // Shifting one turbine leaves its dF unchanged.
  Eigen::MatrixXd shifted = f;
  shifted.col(1).array() += 1.0e4;
  auto [dfs_i, dfs] = dynamic_fatigue(shifted);
  CHECK(dfs_i[1] == doctest::Approx(df_i[1]).epsilon(1e-9));
  (void)dfs;

  // Shifting one of an otherwise-equal pair: ef_i = |c| / 2 each.
  Eigen::MatrixXd pair = Eigen::MatrixXd::Constant(50, 2, 5.0e5);
  pair.col(1).array() += 6.0;
  auto [efs_i, efs] = equalization(pair);
  CHECK(efs_i[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(efs_i[1] == doctest::Approx(3.0).epsilon(1e-12));
  (void)efs;
}

TEST_CASE("rms error") {
  std::vector<double> ref(500), total(500);
  for (std::size_t t = 0; t < ref.size(); ++t) {
    ref[t] = 2.0e7;
    total[t] = 2.0e7;
  }
  CHECK(rms_error(total, ref) == 0.0);

  for (auto& v : total) v += 1.0e6;
  CHECK(rms_error(total, ref) == doctest::Approx(1.0e6).epsilon(1e-12));

  // Sinusoidal error of amplitude A over many periods -> A / sqrt(2).
  const double amplitude = 3.0e5;
  std::vector<double> sin_total(20000), sin_ref(20000, 0.0);
  for (std::size_t t = 0; t < sin_total.size(); ++t) {
    sin_total[t] =
        amplitude * std::sin(2.0 * M_PI * static_cast<double>(t) / 100.0);
  }
  CHECK(rms_error(sin_total, sin_ref) ==
        doctest::Approx(amplitude / std::sqrt(2.0)).epsilon(0.01));

  CHECK_THROWS(rms_error(std::vector<double>{1.0}, std::vector<double>{}));
}

TEST_CASE("normalization against a baseline") {
  const Eigen::MatrixXd f = random_series(100, 3, 21);
  std::vector<double> ref(100, 1.0e7), total(100, 1.05e7);
  auto report = wfmpc::metrics::evaluate(f, total, ref);
  auto baseline = report;

  normalize(report, baseline);
  CHECK(*report.df_normalized == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*report.ef_normalized == doctest::Approx(1.0).epsilon(1e-12));

  auto half = wfmpc::metrics::evaluate((0.5 * f).eval(), total, ref);
  normalize(half, baseline);
  CHECK(*half.df_normalized == doctest::Approx(0.5).epsilon(1e-12));

  auto zero_base = baseline;
  zero_base.df_total = 0.0;
  CHECK_THROWS(normalize(report, zero_base));
}
