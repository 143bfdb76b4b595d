#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "macrocast/arima.hpp"
#include "macrocast/lsboost.hpp"
#include "macrocast/time_series.hpp"

namespace macrocast {

/// What a model may see at one origin. Nothing after `origin` is reachable from here.
struct ForecastInput {
  const TimeSeries& history;             // target series up to and including origin
  const std::vector<TimeSeries>* panel;  // every series truncated at origin; null unless requested
  std::size_t series_index;              // position of the target inside `panel`
  Period origin;
  int horizon;
};

/// Failure with a machine-readable reason code (e.g. "timeout", "crash").
class ForecastFailure : public std::runtime_error {
 public:
  ForecastFailure(std::string reason, const std::string& detail)
      : std::runtime_error(detail), reason_(std::move(reason)) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

/// Per-series state across ascending origins; lets models refit on a stride.
class ForecastSession {
 public:
  virtual ~ForecastSession() = default;
  /// Returns `horizon` point forecasts for origin+1..origin+horizon.
  virtual Eigen::VectorXd forecast(const ForecastInput& in) = 0;
};

class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::string id() const = 0;
  /// Empty when the model can run on `data`; otherwise why not.
  virtual std::string not_applicable(const std::vector<TimeSeries>& data) const {
    (void)data;
    return {};
  }
  virtual bool needs_panel() const { return false; }
  /// Sessions for different series may run concurrently.
  virtual std::unique_ptr<ForecastSession> session(int refit_stride) const = 0;
};

class ForecasterRegistry {
 public:
  /// Throws InvalidArgument on a duplicate id.
  void add(std::shared_ptr<const Forecaster> f);
  bool contains(const std::string& id) const { return models_.count(id) != 0; }
  /// Throws InvalidArgument naming the unknown id.
  const Forecaster& get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<const Forecaster>> models_;
};

struct FactorOptions {
  double variance_threshold = 0.80;
  int max_factors = 8;
  int var_order = 1;
  bool select_order_by_aic = false;
  int max_var_order = 4;
};

std::shared_ptr<const Forecaster> make_persistence_forecaster();
std::shared_ptr<const Forecaster> make_arima_forecaster(AutoArimaOptions options = {});
std::shared_ptr<const Forecaster> make_lsboost_forecaster(LsBoostOptions options = {});
/// Not applicable to single-series data.
std::shared_ptr<const Forecaster> make_factor_forecaster(FactorOptions options = {});

/// Registry with persistence, arima, lsboost and factor under those ids.
ForecasterRegistry builtin_registry();

}  // namespace macrocast
