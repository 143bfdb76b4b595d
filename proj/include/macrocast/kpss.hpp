#pragma once

#include <Eigen/Core>

namespace macrocast {

/// KPSS level-stationarity statistic with Bartlett-weighted long-run variance
/// and truncation lag trunc(4 * (n/100)^(1/4)).
double kpss_statistic(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Tabulated critical value for the level test. Supported levels: 0.10,
/// 0.05, 0.025, 0.01 (0.347, 0.463, 0.574, 0.739).
double kpss_critical_value(double alpha);

/// Lag-`lag` difference applied `times` times.
Eigen::VectorXd difference(const Eigen::Ref<const Eigen::VectorXd>& x, int lag = 1, int times = 1);

/// Smallest d in {0,1,2} whose d-th difference passes the KPSS test at `alpha`.
int select_d(const Eigen::Ref<const Eigen::VectorXd>& x, double alpha = 0.05, int max_d = 2);

/// Seasonal strength max(0, 1 - Var(remainder)/Var(detrended)) from a
/// classical moving-average decomposition with period `m`.
double seasonal_strength(const Eigen::Ref<const Eigen::VectorXd>& x, int m);

}  // namespace macrocast
