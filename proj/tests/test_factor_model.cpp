#include <cmath>
#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "macrocast/errors.hpp"
#include "macrocast/factor_model.hpp"

using namespace macrocast;

namespace {

std::vector<TimeSeries> panel_series(const Eigen::MatrixXd& X) {
  std::vector<TimeSeries> out;
  for (Eigen::Index i = 0; i < X.cols(); ++i)
    out.emplace_back("s" + std::to_string(i), Unit::yoy_percent, Period{2000, 1}, X.col(i));
  return out;
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = z(rng);
  return m;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean(), db = b.array() - b.mean();
  return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

// Hand-built fit carrying only factors, for exercising the VAR layer.
FactorFit fit_with_factors(const Eigen::MatrixXd& F) {
  FactorFit f;
  f.r = static_cast<int>(F.cols());
  f.factors = F;
  f.loadings = Eigen::MatrixXd::Identity(F.cols(), F.cols());
  f.means = Eigen::VectorXd::Zero(F.cols());
  f.stds = Eigen::VectorXd::Ones(F.cols());
  return f;
}

Eigen::MatrixXd simulate_var1(double phi, Eigen::Index T, Eigen::Index r, std::uint64_t seed) {
  const Eigen::MatrixXd u = gaussian(T, r, seed);
  Eigen::MatrixXd F(T, r);
  F.row(0) = u.row(0);
  for (Eigen::Index t = 1; t < T; ++t) F.row(t) = phi * F.row(t - 1) + u.row(t);
  return F;
}

}  // namespace

TEST_CASE("identical series collapse to one factor") {
  const Eigen::VectorXd x = gaussian(40, 1, 3).col(0);
  Eigen::MatrixXd X(40, 4);
  for (int i = 0; i < 4; ++i) X.col(i) = x;
  const auto panel = make_panel(panel_series(X));
  const auto fit = extract_factors(panel, 1);
  CHECK(fit.explained_share[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 1; i < 4; ++i) CHECK(fit.loadings(i, 0) == doctest::Approx(fit.loadings(0, 0)).epsilon(1e-12));
  CHECK(choose_factor_count(panel) == 1);

  auto var = fit_factor_var(fit, 1);
  const auto f0 = factor_forecast(var, 0, 5);
  for (int i = 1; i < 4; ++i) CHECK((factor_forecast(var, i, 5) - f0).cwiseAbs().maxCoeff() < 1e-10);

  try {
    extract_factors(panel, 2);
    FAIL("expected rank deficiency");
  } catch (const FitError& e) {
    CHECK(std::string(e.what()).find("effective rank 1") != std::string::npos);
  }
}

TEST_CASE("two orthogonal blocks are recovered by two factors") {
  const Eigen::Index T = 200;
  const Eigen::MatrixXd f = gaussian(T, 2, 11);
  const Eigen::MatrixXd e = 0.2 * gaussian(T, 6, 12);
  Eigen::MatrixXd X(T, 6);
  for (int i = 0; i < 4; ++i) X.col(i) = f.col(0) + e.col(i);
  for (int i = 4; i < 6; ++i) X.col(i) = f.col(1) + e.col(i);
  const auto fit = extract_factors(make_panel(panel_series(X)), 2);
  const Eigen::VectorXd block_a = X.leftCols(4).rowwise().mean();
  const Eigen::VectorXd block_b = X.rightCols(2).rowwise().mean();
  CHECK(std::abs(correlation(fit.factors.col(0), block_a)) > 0.99);
  CHECK(std::abs(correlation(fit.factors.col(1), block_b)) > 0.99);
}

TEST_CASE("white-noise panel has no dominant factor") {
  const auto fit = extract_factors(make_panel(panel_series(gaussian(200, 10, 5))), 1);
  CHECK(fit.explained_share[0] < 0.25);
  CHECK(fit.explained_share.sum() == doctest::Approx(1.0));
}

TEST_CASE("factors are orthonormal and the loading sign convention holds") {
  const Eigen::MatrixXd X = gaussian(60, 5, 8) + 0.5 * gaussian(60, 1, 9).replicate(1, 5);
  for (int r = 1; r <= 5; ++r) {
    const auto fit = extract_factors(make_panel(panel_series(X)), r);
    const Eigen::MatrixXd G = fit.factors.transpose() * fit.factors / 60.0;
    CHECK((G - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-8);
    for (int k = 0; k < r; ++k) {
      Eigen::Index idx = 0;
      fit.loadings.col(k).cwiseAbs().maxCoeff(&idx);
      CHECK(fit.loadings(idx, k) > 0.0);
    }
  }
}

TEST_CASE("wide panels use the T x T decomposition with the same properties") {
  const Eigen::MatrixXd X = gaussian(12, 30, 21);
  const auto panel = make_panel(panel_series(X));
  const auto fit = extract_factors(panel, 3);
  const Eigen::MatrixXd G = fit.factors.transpose() * fit.factors / 12.0;
  CHECK((G - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  // Same leading share as the N x N route would report: trace fraction of the top eigenvalue.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(panel.transformed);
  const Eigen::VectorXd s2 = svd.singularValues().array().square();
  CHECK(fit.explained_share[0] == doctest::Approx(s2[0] / s2.sum()).epsilon(1e-10));
}

TEST_CASE("standardized extraction is scale invariant") {
  const Eigen::MatrixXd X = gaussian(80, 4, 13) + gaussian(80, 1, 14).replicate(1, 4);
  Eigen::MatrixXd Y = X;
  Y.col(2) *= 7.3;
  Y.col(0) *= 0.01;
  const auto a = extract_factors(make_panel(panel_series(X)), 2);
  const auto b = extract_factors(make_panel(panel_series(Y)), 2);
  CHECK((a.factors - b.factors).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("r = N reconstructs the standardized panel") {
  const auto panel = make_panel(panel_series(gaussian(50, 6, 15)));
  const auto fit = extract_factors(panel, 6);
  const Eigen::MatrixXd rec = fit.factors * fit.loadings.transpose();
  CHECK((rec - panel.transformed).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("panel alignment and validation") {
  std::vector<TimeSeries> s;
  s.emplace_back("a", Unit::yoy_percent, Period{2000, 1}, Eigen::VectorXd::LinSpaced(10, 0, 9));
  s.emplace_back("b", Unit::yoy_percent, Period{2000, 3}, Eigen::VectorXd::LinSpaced(10, 5, 14));
  const auto p = make_panel(s);
  CHECK(p.start == Period{2000, 3});
  CHECK(p.data.rows() == 8);
  CHECK(p.data(0, 0) == 2.0);
  CHECK(p.data(0, 1) == 5.0);
  s.emplace_back("c", Unit::yoy_percent, Period{2010, 1}, Eigen::VectorXd::Ones(4));
  CHECK_THROWS_AS(make_panel(s), DataError);
  s.pop_back();
  s.emplace_back("c", Unit::yoy_percent, Period{2000, 1}, Eigen::VectorXd::Ones(12));
  CHECK_THROWS_AS(make_panel(s), DataError);
  CHECK_NOTHROW(make_panel(s, false));
}

TEST_CASE("VAR(1) coefficients are recovered from simulated factors") {
  const auto fit = fit_factor_var(fit_with_factors(simulate_var1(0.7, 500, 2, 31)), 1);
  const Eigen::MatrixXd expected = 0.7 * Eigen::MatrixXd::Identity(2, 2);
  CHECK((fit.var_coeffs[0] - expected).cwiseAbs().maxCoeff() < 0.1);
  CHECK(fit.stationary);
  CHECK(fit.spectral_radius < 1.0);
  CHECK((fit.innovation_cov - fit.innovation_cov.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.innovation_cov);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("white-noise factors give coefficients within three standard errors of zero") {
  const auto fit = fit_factor_var(fit_with_factors(gaussian(300, 3, 41)), 2);
  REQUIRE(fit.var_coeffs.size() == 2);
  for (int l = 0; l < 2; ++l)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        // Row (l*r + j) of the stacked estimate holds the coefficient of lag-l factor j in equation i.
        const double se = fit.coeff_stderr(l * 3 + j, i);
        CHECK(std::abs(fit.var_coeffs[static_cast<std::size_t>(l)](i, j)) < 3.0 * se);
      }
}

TEST_CASE("standard errors match the textbook OLS formula") {
  const Eigen::MatrixXd F = simulate_var1(0.5, 120, 1, 43);
  const auto fit = fit_factor_var(fit_with_factors(F), 1);
  const Eigen::VectorXd x = F.col(0).head(119), y = F.col(0).tail(119);
  const double b = x.dot(y) / x.squaredNorm();
  const double s2 = (y - b * x).squaredNorm() / 118.0;
  CHECK(fit.var_coeffs[0](0, 0) == doctest::Approx(b).epsilon(1e-12));
  CHECK(fit.coeff_stderr(0, 0) == doctest::Approx(std::sqrt(s2 / x.squaredNorm())).epsilon(1e-10));
  CHECK(fit.innovation_cov(0, 0) == doctest::Approx((y - b * x).squaredNorm() / 119.0).epsilon(1e-12));
}

TEST_CASE("p = 0 forecasts the in-sample mean") {
  const Eigen::MatrixXd X = gaussian(40, 3, 51).array() + 4.0;
  const auto panel = make_panel(panel_series(X));
  const auto fit = fit_factor_var(extract_factors(panel, 2), 0);
  for (int i = 0; i < 3; ++i) {
    const auto f = factor_forecast(fit, i, 4);
    for (int h = 0; h < 4; ++h) CHECK(f[h] == doctest::Approx(X.col(i).mean()).epsilon(1e-12));
  }
}

TEST_CASE("one-factor VAR(1) forecast matches the AR(1) closed form") {
  Eigen::MatrixXd F = simulate_var1(0.6, 100, 1, 61);
  F.array() -= F.mean();
  auto fit = fit_with_factors(F);
  fit.loadings(0, 0) = 0.8;
  fit.means[0] = 2.5;
  fit.stds[0] = 1.7;
  fit = fit_factor_var(fit, 1);
  const double phi = fit.var_coeffs[0](0, 0);
  const auto f = factor_forecast(fit, 0, 8);
  for (int h = 1; h <= 8; ++h)
    CHECK(f[h - 1] == doctest::Approx(2.5 + 1.7 * 0.8 * std::pow(phi, h) * F(99, 0)).epsilon(1e-12));
  CHECK_THROWS_AS(factor_forecast(fit, 0, 0), InvalidArgument);
  CHECK_THROWS_AS(factor_forecast(fit, 1, 1), InvalidArgument);
}

TEST_CASE("explosive dynamics are flagged but still forecast") {
  const auto fit = fit_factor_var(fit_with_factors(simulate_var1(1.05, 80, 1, 71)), 1);
  CHECK_FALSE(fit.stationary);
  CHECK(fit.spectral_radius >= 1.0);
  CHECK(std::isfinite(factor_forecast(fit, 0, 4)[3]));
}

TEST_CASE("VAR order selection and preconditions") {
  CHECK(select_var_order(fit_with_factors(simulate_var1(0.7, 400, 2, 81)), 4) >= 1);
  CHECK(select_var_order(fit_with_factors(gaussian(400, 2, 82)), 4) <= 1);
  CHECK_THROWS_AS(fit_factor_var(fit_with_factors(gaussian(5, 2, 83)), 2), InvalidArgument);
  CHECK_THROWS_AS(fit_factor_var(fit_with_factors(Eigen::MatrixXd::Zero(30, 1)), 1), FitError);
}

TEST_CASE("factor fit JSON round trip") {
  const auto panel = make_panel(panel_series(gaussian(30, 3, 91)));
  const auto fit = fit_factor_var(extract_factors(panel, 2), 1);
  const auto back = factor_fit_from_json(factor_fit_to_json(fit));
  CHECK(back.loadings == fit.loadings);
  CHECK(back.factors == fit.factors);
  CHECK(back.var_coeffs[0] == fit.var_coeffs[0]);
  CHECK(factor_fit_to_json(back) == factor_fit_to_json(fit));
  CHECK((factor_forecast(back, 1, 3) - factor_forecast(fit, 1, 3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(factor_fit_from_json("{\"format\":\"x\"}"), DataError);
}
