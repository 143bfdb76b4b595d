#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "macrocast/time_series.hpp"

namespace macrocast {

/// Orders of a seasonal ARIMA(p,d,q)(P,D,Q)[m] model.
struct ArimaSpec {
  int p = 0, d = 0, q = 0;
  int P = 0, D = 0, Q = 0;
  int m = 4;
  bool with_constant = false;

  /// Estimated coefficients excluding the innovation variance.
  [[nodiscard]] int coefficient_count() const noexcept { return p + q + P + Q + (with_constant ? 1 : 0); }
  /// Throws InvalidArgument when an order is outside its admissible range.
  void validate() const;
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const ArimaSpec&, const ArimaSpec&) = default;
};

struct ArimaFit {
  ArimaSpec spec;
  Eigen::VectorXd ar, ma, sar, sma;  // ar: 1 - sum ar_i B^i; ma: 1 + sum ma_j B^j
  double constant = 0.0;             // mean of the differenced series
  double sigma2 = 0.0;
  double loglik = 0.0;
  double aicc = 0.0;
  Eigen::Index n_obs = 0;            // length of the history the fit belongs to
};

/// Exact Gaussian maximum likelihood for a fixed spec (CSS warm start, then
/// BFGS over partial-autocorrelation parameters). Throws FitError.
ArimaFit fit_arima(const TimeSeries& history, const ArimaSpec& spec);

struct AutoArimaOptions {
  int max_p = 5, max_q = 5;
  int max_P = 2, max_Q = 2;
  int max_order = 0;  // bound on p+q+P+Q; 0 disables
  int max_d = 2, max_D = 1;
  int m = 4;
  bool seasonal = true;
  double kpss_alpha = 0.05;
  double seasonal_strength_threshold = 0.64;
  int max_steps = 94;
};

struct ArimaCandidate {
  ArimaSpec spec;
  double aicc = 0.0;  // +inf when the fit failed or was inadmissible
  std::string note;   // empty on success
};

struct AutoArimaResult {
  ArimaFit fit;
  std::vector<ArimaCandidate> log;  // every spec evaluated, in evaluation order
  double seasonal_strength = 0.0;
};

/// Stepwise order search minimising AICc. Requires >= 16 observations.
AutoArimaResult auto_arima_search(const TimeSeries& history, const AutoArimaOptions& options = {});
ArimaFit auto_arima(const TimeSeries& history, const AutoArimaOptions& options = {});

/// Point forecasts with future innovations set to zero. `history` must be the
/// series the fit was produced from (same length as fit.n_obs).
Eigen::VectorXd arima_forecast(const ArimaFit& fit, const TimeSeries& history, int horizon);

/// Same coefficients, re-targeted to a longer history (used between refits).
ArimaFit arima_extend(const ArimaFit& fit, const TimeSeries& history);

/// In-sample one-step-ahead predictions; NaN for the first d + m*D entries.
Eigen::VectorXd arima_fitted(const ArimaFit& fit, const TimeSeries& history);

/// True when every root of 1 - sum c_i z^i lies outside the circle |z| = margin.
bool roots_outside_unit_circle(const Eigen::Ref<const Eigen::VectorXd>& coeffs, double margin = 1.01);

/// Maps unconstrained values to the coefficients of a stationary AR polynomial
/// through partial autocorrelations tanh(u).
Eigen::VectorXd pacf_to_coefficients(const Eigen::Ref<const Eigen::VectorXd>& raw);

}  // namespace macrocast
