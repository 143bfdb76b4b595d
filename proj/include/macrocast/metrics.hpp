#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "macrocast/time_series.hpp"

namespace macrocast {

struct ErrorSample {
  Eigen::VectorXd actuals;
  Eigen::VectorXd forecasts;
  std::vector<Period> periods;

  /// Throws InvalidArgument on length mismatch, emptiness, non-increasing periods.
  ErrorSample(Eigen::VectorXd actuals, Eigen::VectorXd forecasts, std::vector<Period> periods);
  /// Periods default to consecutive quarters from 2000Q1.
  ErrorSample(Eigen::VectorXd actuals, Eigen::VectorXd forecasts);

  Eigen::Index size() const { return actuals.size(); }
  Eigen::VectorXd errors() const { return actuals - forecasts; }
};

enum class MetricKind { mae, mse, rmse, smape, mase };
std::string_view to_string(MetricKind k);

double mae(const ErrorSample& e);
double mse(const ErrorSample& e);
double rmse(const ErrorSample& e);
/// Percent scale in [0, 200]; a term with both |y| and |yhat| below 1e-12 counts as 0.
double smape(const ErrorSample& e);

/// Mean absolute m-step naive difference of the in-sample window.
/// Throws InvalidArgument when too short, DegenerateError when zero.
double mase_denominator(const Eigen::VectorXd& insample, int m);
double mase(const ErrorSample& e, const TimeSeries& insample, int m);

using Scores = std::map<std::string, double>;

/// Ranks 1..K, ties share the average rank. Non-finite scores are left out.
Scores rank_models(const Scores& scores, bool lower_is_better = true);

/// Arithmetic mean of each model's rank over the columns where it has one.
Scores mean_ranks(const std::vector<Scores>& rank_columns);

enum class Tier { good, ok, meh, bad };
std::string_view to_string(Tier t);

/// Quartile binning of ranks: tier = min(3, floor(4 (rank - 1) / K)).
/// A column whose finite values are all equal is labelled "ok" throughout.
std::map<std::string, Tier> tier_labels(const Scores& column, bool lower_is_better = true);

}  // namespace macrocast
