#include <cmath>
#include <random>

#include "doctest.h"
#include "macrocast/dm_test.hpp"
#include "macrocast/errors.hpp"

using namespace macrocast;

namespace {

// Loop transcription of the statistic, independent of the vectorised code.
double brute_force_dm(const std::vector<double>& d, int h) {
  const int T = static_cast<int>(d.size());
  double mean = 0;
  for (double x : d) mean += x;
  mean /= T;
  auto gamma = [&](int k) {
    double s = 0;
    for (int t = k + 1; t <= T; ++t) s += (d[t - 1] - mean) * (d[t - 1 - k] - mean);
    return s / T;
  };
  double v = gamma(0);
  for (int k = 1; k <= h - 1; ++k) v += 2.0 * (1.0 - double(k) / h) * gamma(k);
  if (v <= 0) v = gamma(0);
  return mean / std::sqrt(v / T);
}

LossDifferential differential(const std::vector<double>& d, int h) {
  LossDifferential ld;
  ld.d = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
  ld.horizon = h;
  return ld;
}

double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

TEST_CASE("loss differential examples") {
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
  const ErrorSample e1(y, Eigen::VectorXd::Constant(2, 1.0)), e2(y, Eigen::VectorXd::Constant(2, -2.0));
  CHECK(loss_differential(e1, e2, Loss::squared, 1).d == Eigen::VectorXd::Constant(2, -3.0));
  CHECK(loss_differential(e1, e2, Loss::absolute, 1).d == Eigen::VectorXd::Constant(2, -1.0));
  CHECK(loss_differential(e1, e1, Loss::squared, 1).d == Eigen::VectorXd::Zero(2));
  const ErrorSample shifted(y, y, {Period{2001, 1}, Period{2001, 2}});
  CHECK_THROWS_AS(loss_differential(e1, shifted, Loss::squared, 1), InvalidArgument);
}

TEST_CASE("zero-mean alternating differential gives DM = 0, p = 1") {
  std::vector<double> d(100);
  for (int i = 0; i < 100; ++i) d[i] = i % 2 == 0 ? 1.0 : -1.0;
  const auto r = dm_statistic(differential(d, 1));
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("constant differential is degenerate") {
  CHECK_THROWS_AS(dm_statistic(differential(std::vector<double>(20, 0.0), 1)), DegenerateError);
  CHECK_THROWS_AS(dm_statistic(differential(std::vector<double>(20, 2.5), 2)), DegenerateError);
}

TEST_CASE("length precondition") {
  CHECK_THROWS_AS(dm_statistic(differential(std::vector<double>(7, 1.0), 1)), InvalidArgument);
  std::vector<double> d(9);
  for (int i = 0; i < 9; ++i) d[i] = i;
  CHECK_THROWS_AS(dm_statistic(differential(d, 5)), InvalidArgument);
  CHECK_NOTHROW(dm_statistic(differential(d, 4)));
}

TEST_CASE("statistic matches the loop oracle and p-value matches the normal CDF") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  for (int h : {1, 2, 3, 4}) {
    for (int k = 0; k < 100; ++k) {
      std::vector<double> d(40 + k);
      for (auto& x : d) x = 0.3 + z(rng);
      const auto r = dm_statistic(differential(d, h));
      CHECK(r.statistic == doctest::Approx(brute_force_dm(d, h)).epsilon(1e-10));
      CHECK(std::abs(r.p_value - 2.0 * (1.0 - normal_cdf(std::abs(r.statistic)))) < 1e-12);
      CHECK(r.p_value >= 0.0);
      CHECK(r.p_value <= 1.0);
    }
  }
}

TEST_CASE("kernel variance stays positive so the gamma_0 fallback is not taken") {
  // The (1 - k/h) weights are the Bartlett kernel, which keeps the estimate non-negative.
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  for (int h : {2, 3, 4}) {
    for (int k = 0; k < 200; ++k) {
      std::vector<double> d(16);
      for (int i = 0; i < 16; ++i) d[i] = (i % 2 == 0 ? 1.0 : -1.0) + 0.1 * z(rng);
      const auto r = dm_statistic(differential(d, h));
      CHECK(r.variance > 0.0);
      CHECK_FALSE(r.variance_fallback);
    }
  }
}

TEST_CASE("antisymmetry under swapping the models") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  for (int h : {1, 2, 4}) {
    Eigen::VectorXd y(60), f1(60), f2(60);
    for (int i = 0; i < 60; ++i) {
      y[i] = z(rng);
      f1[i] = y[i] + z(rng);
      f2[i] = y[i] + 1.3 * z(rng);
    }
    const ErrorSample a(y, f1), b(y, f2);
    for (Loss loss : {Loss::squared, Loss::absolute}) {
      const auto ab = dm_statistic(loss_differential(a, b, loss, h));
      const auto ba = dm_statistic(loss_differential(b, a, loss, h));
      CHECK(std::abs(ab.statistic + ba.statistic) <= 1e-12);
      CHECK(std::abs(ab.p_value - ba.p_value) <= 1e-12);
    }
  }
}

TEST_CASE("rejection rate under the null is near nominal") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z;
  int rejections = 0;
  const int pairs = 2000, T = 100;
  Eigen::VectorXd y(T), f1(T), f2(T);
  for (int k = 0; k < pairs; ++k) {
    for (int t = 0; t < T; ++t) {
      y[t] = z(rng);
      f1[t] = y[t] + z(rng);
      f2[t] = y[t] + z(rng);
    }
    const auto r = dm_statistic(loss_differential(ErrorSample(y, f1), ErrorSample(y, f2), Loss::squared, 1));
    rejections += r.p_value < 0.05;
  }
  const double rate = double(rejections) / pairs;
  MESSAGE("null rejection rate: " << rate);
  CHECK(rate >= 0.03);
  CHECK(rate <= 0.08);
}

TEST_CASE("p-value is monotone decreasing in |statistic|") {
  double prev = 1.0;
  for (double s = 0.0; s < 8.0; s += 0.05) {
    const double p = normal_two_sided_p(s);
    CHECK(p <= prev);
    CHECK(p == normal_two_sided_p(-s));
    prev = p;
  }
  CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("Student-t p-values and the optional small-sample correction") {
  CHECK(student_t_two_sided_p(2.228138851986274, 10) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(student_t_two_sided_p(0.0, 7) == doctest::Approx(1.0));
  // t with 1 dof is Cauchy: two-sided p = 1 - 2 atan(t) / pi.
  for (double t : {0.3, 1.0, 4.0})
    CHECK(student_t_two_sided_p(t, 1) == doctest::Approx(1.0 - 2.0 * std::atan(t) / M_PI).epsilon(1e-12));
  CHECK(incomplete_beta(2, 3, 0.4) == doctest::Approx(0.5248).epsilon(1e-12));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  std::vector<double> d(30);
  for (auto& x : d) x = 0.4 + z(rng);
  const auto plain = dm_statistic(differential(d, 2));
  const auto hln = dm_statistic(differential(d, 2), DmOptions{true});
  const double T = 30, h = 2;
  CHECK(hln.statistic == doctest::Approx(plain.statistic * std::sqrt((T + 1 - 2 * h + h * (h - 1) / T) / T)));
  CHECK(hln.p_value == doctest::Approx(student_t_two_sided_p(hln.statistic, T - 1)));
  CHECK(hln.p_value > plain.p_value);
}
