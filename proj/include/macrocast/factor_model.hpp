#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

#include "macrocast/time_series.hpp"

namespace macrocast {

/// Series aligned on their common span, stored T x N.
struct FactorPanel {
  std::vector<std::string> ids;
  Period start;
  Eigen::MatrixXd data;         // raw values
  Eigen::MatrixXd transformed;  // standardized (or demeaned) values used for extraction
  Eigen::VectorXd means, stds;  // stds are 1 when not standardized
  bool standardized = true;
};

/// Aligns on the intersection of spans. Throws DataError when there is no
/// overlap or, with standardization, when a series is constant there.
FactorPanel make_panel(const std::vector<TimeSeries>& series, bool standardize = true);

struct FactorFit {
  int r = 0;
  Eigen::MatrixXd loadings;         // N x r
  Eigen::MatrixXd factors;          // T x r, (1/T) F'F = I
  Eigen::VectorXd explained_share;  // per principal component, descending
  Eigen::VectorXd means, stds;
  int var_order = 0;
  std::vector<Eigen::MatrixXd> var_coeffs;  // Phi_1..Phi_p, each r x r
  Eigen::MatrixXd innovation_cov;           // r x r
  Eigen::MatrixXd coeff_stderr;             // (r*p) x r, row block l holds Phi_l' standard errors
  double spectral_radius = 0.0;             // of the VAR companion matrix
  bool stationary = true;
  bool dynamics_fitted = false;
};

/// Principal-components extraction of `r` factors with loadings by least squares.
FactorFit extract_factors(const FactorPanel& panel, int r);

/// Smallest r whose cumulative explained share reaches `threshold`, capped at min(N-1, cap) and >= 1.
int choose_factor_count(const FactorPanel& panel, double threshold = 0.80, int cap = 8);

/// Per-equation OLS of F_t on F_{t-1..t-p} without intercept.
FactorFit fit_factor_var(FactorFit fit, int p);

/// VAR order in [0, max_p] minimising AIC on a common estimation sample.
int select_var_order(const FactorFit& fit, int max_p = 4);

/// Iterates the factor VAR with zero innovations and maps back to the target
/// series' original scale.
Eigen::VectorXd factor_forecast(const FactorFit& fit, int target_index, int horizon);

std::string factor_fit_to_json(const FactorFit& fit);
FactorFit factor_fit_from_json(std::string_view text);

}  // namespace macrocast
