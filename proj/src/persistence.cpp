#include "macrocast/persistence.hpp"

#include "macrocast/errors.hpp"

namespace macrocast {

Eigen::VectorXd persistence_forecast(const TimeSeries& history, int horizon) {
  if (history.empty()) throw InvalidArgument("persistence: empty history");
  if (horizon < 1) throw InvalidArgument("persistence: horizon must be >= 1");
  return Eigen::VectorXd::Constant(horizon, history.back());
}

}  // namespace macrocast
