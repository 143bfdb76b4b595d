#include "macrocast/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "macrocast/errors.hpp"

namespace macrocast {

ErrorSample::ErrorSample(Eigen::VectorXd a, Eigen::VectorXd f, std::vector<Period> p)
    : actuals(std::move(a)), forecasts(std::move(f)), periods(std::move(p)) {
  if (actuals.size() == 0) throw InvalidArgument("error sample is empty");
  if (actuals.size() != forecasts.size() || static_cast<std::size_t>(actuals.size()) != periods.size())
    throw InvalidArgument("error sample lengths differ");
  for (std::size_t i = 1; i < periods.size(); ++i)
    if (!(periods[i - 1] < periods[i])) throw InvalidArgument("error sample periods must be strictly increasing");
}

namespace {

std::vector<Period> consecutive(Eigen::Index n) {
  std::vector<Period> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(Period{2000, 1}.shifted(static_cast<int>(i)));
  return out;
}

}  // namespace

ErrorSample::ErrorSample(Eigen::VectorXd a, Eigen::VectorXd f) : ErrorSample(a, f, consecutive(a.size())) {}

std::string_view to_string(MetricKind k) {
  switch (k) {
    case MetricKind::mae: return "MAE";
    case MetricKind::mse: return "MSE";
    case MetricKind::rmse: return "RMSE";
    case MetricKind::smape: return "SMAPE";
    case MetricKind::mase: return "MASE";
  }
  return "?";
}

double mae(const ErrorSample& e) { return e.errors().cwiseAbs().mean(); }

double mse(const ErrorSample& e) { return e.errors().squaredNorm() / static_cast<double>(e.size()); }

double rmse(const ErrorSample& e) { return std::sqrt(mse(e)); }

double smape(const ErrorSample& e) {
  double sum = 0.0;
  for (Eigen::Index t = 0; t < e.size(); ++t) {
    const double y = e.actuals[t], f = e.forecasts[t];
    if (std::abs(y) < 1e-12 && std::abs(f) < 1e-12) continue;
    sum += 2.0 * std::abs(y - f) / (std::abs(y) + std::abs(f));
  }
  return 100.0 * sum / static_cast<double>(e.size());
}

double mase_denominator(const Eigen::VectorXd& x, int m) {
  if (m < 1) throw InvalidArgument("MASE seasonal period must be >= 1");
  if (x.size() <= m) throw InvalidArgument("MASE in-sample window must be longer than m");
  const auto n = x.size() - m;
  const double d = (x.tail(n) - x.head(n)).cwiseAbs().mean();
  if (!(d > 0.0))
    throw DegenerateError("MASE denominator is zero: in-sample series is exactly periodic with period " +
                          std::to_string(m));
  return d;
}

double mase(const ErrorSample& e, const TimeSeries& insample, int m) {
  return mae(e) / mase_denominator(insample.values(), m);
}

Scores rank_models(const Scores& scores, bool lower_is_better) {
  std::vector<std::pair<double, std::string>> v;
  for (const auto& [k, s] : scores)
    if (std::isfinite(s)) v.emplace_back(lower_is_better ? s : -s, k);
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Scores out;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) out[v[k].second] = avg;
    i = j;
  }
  return out;
}

Scores mean_ranks(const std::vector<Scores>& cols) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& c : cols)
    for (const auto& [k, r] : c) {
      acc[k].first += r;
      acc[k].second += 1;
    }
  Scores out;
  for (const auto& [k, a] : acc) out[k] = a.first / a.second;
  return out;
}

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::good: return "good";
    case Tier::ok: return "ok";
    case Tier::meh: return "meh";
    case Tier::bad: return "bad";
  }
  return "?";
}

std::map<std::string, Tier> tier_labels(const Scores& column, bool lower_is_better) {
  const auto ranks = rank_models(column, lower_is_better);
  std::map<std::string, Tier> out;
  if (ranks.empty()) return out;
  const double K = static_cast<double>(ranks.size());
  const bool all_equal = std::all_of(ranks.begin(), ranks.end(),
                                     [&](const auto& kv) { return kv.second == ranks.begin()->second; });
  for (const auto& [k, r] : ranks) {
    if (all_equal) {
      out[k] = Tier::ok;
      continue;
    }
    const int t = std::min(3, static_cast<int>(std::floor(4.0 * (r - 1.0) / K)));
    out[k] = static_cast<Tier>(t);
  }
  return out;
}

}  // namespace macrocast
