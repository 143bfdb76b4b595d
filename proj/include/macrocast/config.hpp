#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "macrocast/backtest.hpp"
#include "macrocast/forecaster.hpp"
#include "macrocast/report.hpp"

namespace macrocast {

struct RunConfig {
  std::string data;
  Unit unit = Unit::yoy_percent;
  std::vector<std::string> series;  // empty: all
  std::vector<std::string> models;  // empty: builtins, then adapters
  std::map<std::string, std::string> adapters;  // name -> command, fixture:PATH or http(s)://URL
  AutoArimaOptions arima;
  LsBoostOptions lsboost;
  FactorOptions factor;
  int horizon = 1;
  std::optional<Period> first_origin, last_origin;
  int refit_stride = 1;
  std::vector<NamedWindow> slices = default_slices();
  double failure_budget = 0.10;
  int mase_m = 1;
  bool mase_per_origin = false;
  Loss dm_loss = Loss::squared;
  std::vector<std::string> dm_references;  // empty: persistence and arima when present
  bool harvey = false;
  RobustnessOptions robustness;
  int adapter_timeout_ms = 30000;
  std::optional<std::string> cache_dir, record_dir;
  std::string out = "macrocast-out";
  std::uint64_t seed = 20240917;
  int jobs = 1;

  /// Models in run order: the explicit list, or builtins then adapter names.
  std::vector<std::string> model_ids() const;
  std::vector<std::string> references() const;
};

/// Overlays the keys present in a JSON config document. Unknown keys and
/// ill-typed values throw InvalidArgument.
void apply_config_json(RunConfig& cfg, std::string_view text);

/// Every setting that affects results, plus the data digest. Output paths,
/// cache and parallelism are left out so reruns elsewhere compare equal.
std::string resolved_config_json(const RunConfig& cfg, const std::string& data_sha256);

}  // namespace macrocast
