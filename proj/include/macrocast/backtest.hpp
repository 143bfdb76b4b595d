#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "macrocast/dm_test.hpp"
#include "macrocast/forecaster.hpp"
#include "macrocast/metrics.hpp"

namespace macrocast {

struct NamedWindow {
  std::string name;
  Window window;
  friend bool operator==(const NamedWindow&, const NamedWindow&) = default;
};

/// Full sample plus pre-, during- and post-COVID slices of the published leaderboard.
std::vector<NamedWindow> default_slices();
/// "name=YYYYQn-YYYYQn" or bare "YYYYQn-YYYYQn" (named after the window).
NamedWindow parse_named_window(std::string_view token);

struct BacktestPlan {
  std::vector<std::string> series_ids;  // empty: every series in the data, in data order
  std::vector<std::string> model_ids;
  std::optional<Period> first_origin;  // default: 16th observation of each series
  std::optional<Period> last_origin;   // default: last period with an observed target
  int horizon = 1;
  int refit_stride = 1;
  std::vector<NamedWindow> slices = default_slices();
  double failure_budget = 0.10;  // max share of failed origins per run
  int jobs = 1;
};

constexpr int kMinTrainingObservations = 16;

struct ForecastRecord {
  Period origin;
  Period target;  // origin + horizon
  double forecast = std::numeric_limits<double>::quiet_NaN();
  double actual = std::numeric_limits<double>::quiet_NaN();
  bool ok = true;
  std::string failure;  // reason code when !ok
  std::string detail;
};

struct BacktestRun {
  std::string model_id;
  std::string series_id;
  int horizon = 1;
  std::string not_applicable;  // non-empty: the model was not run on this data
  std::vector<ForecastRecord> records;

  std::size_t failures() const;
  bool over_budget(double budget) const;
};

/// Throws InvalidArgument when the plan does not fit the data or names unknown models.
void validate_plan(const BacktestPlan& plan, const std::vector<TimeSeries>& data, const ForecasterRegistry& registry);

/// One run per (series, model) in plan order. Forecaster failures are recorded, never thrown.
std::vector<BacktestRun> run_backtest(const BacktestPlan& plan, const std::vector<TimeSeries>& data,
                                      const ForecasterRegistry& registry);

struct EvaluationOptions {
  int mase_m = 1;
  bool mase_per_origin = false;     // mean of per-origin scaled errors instead of pooled / final denominator
  double max_missing_share = 0.10;  // above this a cell is n/a
};

struct MetricCell {
  bool available = false;
  std::string note;  // why not available, or a MASE caveat
  std::size_t n_expected = 0, n_records = 0, n_failed = 0;
  double mae = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double smape = std::numeric_limits<double>::quiet_NaN();
  double mase = std::numeric_limits<double>::quiet_NaN();
};

struct SliceEvaluation {
  NamedWindow slice;
  std::map<std::string, std::map<std::string, MetricCell>> cells;  // [series][model]
  std::map<std::string, Scores> rmse_ranks;                        // [series]
  std::map<std::string, std::map<MetricKind, std::map<std::string, Tier>>> tiers;  // [series][metric]
  Scores mean_rank;  // RMSE rank averaged over series
};

struct MetricReport {
  std::vector<std::string> series_ids, model_ids;  // first-appearance order in the runs
  EvaluationOptions options;
  std::vector<SliceEvaluation> slices;
};

/// Slice membership is by target period, inclusive. `data` supplies MASE training windows.
MetricReport evaluate_slices(const std::vector<BacktestRun>& runs, const std::vector<TimeSeries>& data,
                             const std::vector<NamedWindow>& slices, const EvaluationOptions& options = {});

/// Uniform integer in [lo, hi] by rejection sampling on raw 64-bit draws, so the
/// sequence is identical across standard libraries.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi);

struct RobustnessPoint {
  Window window;
  double actual_variance = 0.0;
  double model_rmse = 0.0;
};

struct RobustnessResult {
  std::vector<RobustnessPoint> points;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Samples windows over the run's successful records (ordered by target) and
/// regresses window RMSE on the sample variance of the actuals.
RobustnessResult robustness_regression(const BacktestRun& run, int n_windows = 200, int min_len = 10,
                                       std::uint64_t seed = 20240917);

struct DmCell {
  std::string series_id, slice, candidate, reference;
  std::optional<double> statistic, p_value;
  std::size_t n = 0;
  std::string note;  // reason for n/a, or the variance-fallback warning
};

constexpr double kSignificanceLevel = 0.05;
inline bool significant(double p) { return p < kSignificanceLevel; }

/// Every (series, slice, candidate) against each reference present in the runs,
/// paired on origins where both models succeeded.
std::vector<DmCell> dm_grid(const std::vector<BacktestRun>& runs, const std::vector<NamedWindow>& slices,
                            const std::vector<std::string>& references, Loss loss, const DmOptions& options = {});

}  // namespace macrocast
