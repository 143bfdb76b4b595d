#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "macrocast/backtest.hpp"

namespace macrocast {

/// runs.json: every record at full precision; a missing forecast is null.
std::string runs_to_json(const std::vector<BacktestRun>& runs);
/// Throws DataError on malformed input.
std::vector<BacktestRun> runs_from_json(std::string_view text);

struct RobustnessFit {
  std::string series_id, model_id;
  std::optional<RobustnessResult> result;
  std::string note;  // why there is no result
};

struct RobustnessOptions {
  int n_windows = 200;
  int min_len = 10;
  std::uint64_t seed = 20240917;
};

/// One fit per applicable run; too-short or degenerate runs get a note instead.
std::vector<RobustnessFit> robustness_fits(const std::vector<BacktestRun>& runs, const RobustnessOptions& options);

struct RunSummary {
  std::string series_id, model_id;
  std::size_t records = 0, failed = 0;
  bool over_budget = false;
  std::string not_applicable;
};

std::vector<RunSummary> summarize_runs(const std::vector<BacktestRun>& runs, double failure_budget);

struct Report {
  std::string config_json;  // resolved configuration, embedded as an object
  MetricReport metrics;
  Loss dm_loss = Loss::squared;
  std::vector<std::string> dm_references;
  std::vector<DmCell> dm;
  RobustnessOptions robustness_options;
  std::vector<RobustnessFit> robustness;
  std::vector<RunSummary> runs;
};

/// Deterministic: identical inputs give identical bytes.
std::string report_json(const Report& report);
/// One row per (slice, series, model).
std::string report_csv(const Report& report);
/// Per-slice grid: models as rows, series x {MAE, RMSE, SMAPE, MASE} as columns, then the mean rank.
std::string report_markdown(const Report& report);

/// One row per (series, slice, model) with a p-value column per reference.
std::string dm_grid_csv(const Report& report);
std::string dm_grid_json(const Report& report);
/// `**p**` when significant, "n/a" when missing, otherwise 4 decimals.
std::string format_p_value(std::optional<double> p);

/// One row per sampled window.
std::string robustness_csv(const Report& report);

/// Per-series RMSE and DM p-value of every model against `reference`, over
/// records whose target lies in `window`.
std::string dm_table(const std::vector<BacktestRun>& runs, const std::string& reference, Loss loss,
                     const NamedWindow& window, const DmOptions& options = {});

}  // namespace macrocast
