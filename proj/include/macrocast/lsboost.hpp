#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

#include "macrocast/time_series.hpp"

namespace macrocast {

/// Own-lag features plus optional quarter dummies (Q1 is the reference class).
struct LagFeatureConfig {
  std::vector<int> lags{1, 2, 3, 4};
  bool include_seasonal_dummies = true;

  void validate() const;  // lags non-empty, positive, distinct
  [[nodiscard]] int max_lag() const;
  [[nodiscard]] Eigen::Index width() const { return static_cast<Eigen::Index>(lags.size()) + (include_seasonal_dummies ? 3 : 0); }
};

struct SupervisedData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<Period> targets;  // period of each row's target
};

SupervisedData make_supervised(const TimeSeries& history, const LagFeatureConfig& cfg);

/// Feature row for the target at index `t` of `values` (which starts at `start`).
Eigen::VectorXd lag_features(const Eigen::Ref<const Eigen::VectorXd>& values, Eigen::Index t, Period start,
                             const LagFeatureConfig& cfg);

struct Stump {
  int feature_index = 0;
  double threshold = 0.0;  // +inf when no split exists
  double left_value = 0.0;
  double right_value = 0.0;

  [[nodiscard]] double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return x[feature_index] <= threshold ? left_value : right_value;
  }
};

struct BoostStage {
  double rho = 1.0;  // step length; optimal leaf values make it 1 under squared loss
  Stump learner;
};

struct BoostModel {
  double f0 = 0.0;
  double shrinkage = 0.1;
  int n_stages = 0;
  Eigen::Index n_features = 0;
  std::vector<BoostStage> stages;
  std::vector<double> training_mse;  // [0] is the MSE of f0, [m] after stage m
};

/// Least-squares boosting with depth-1 regression trees.
BoostModel fit_lsboost(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                       int n_stages, double shrinkage);

double predict_lsboost(const BoostModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct LsBoostOptions {
  LagFeatureConfig features;
  int n_stages = 100;
  double shrinkage = 0.1;
};

/// Fits once on `history`, then forecasts recursively, feeding each step
/// back in as a pseudo-observation.
Eigen::VectorXd lsboost_forecast(const TimeSeries& history, const LsBoostOptions& options, int horizon);
Eigen::VectorXd lsboost_forecast(const BoostModel& model, const TimeSeries& history, const LagFeatureConfig& cfg,
                                 int horizon);

/// Versioned JSON document: {"format":"macrocast.lsboost","version":1,...}.
std::string lsboost_to_json(const BoostModel& model);
BoostModel lsboost_from_json(std::string_view text);

}  // namespace macrocast
