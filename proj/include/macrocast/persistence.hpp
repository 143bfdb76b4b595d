#pragma once

#include <Eigen/Core>

#include "macrocast/time_series.hpp"

namespace macrocast {

/// Carries the last observed value forward for every step.
Eigen::VectorXd persistence_forecast(const TimeSeries& history, int horizon);

}  // namespace macrocast
