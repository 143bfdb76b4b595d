#include "macrocast/time_series.hpp"

#include <cmath>
#include <utility>

#include "macrocast/errors.hpp"

namespace macrocast {

std::string_view to_string(Unit u) noexcept {
  switch (u) {
    case Unit::yoy_percent: return "yoy_percent";
    case Unit::qoq_percent: return "qoq_percent";
    case Unit::index_level: return "index_level";
  }
  return "?";
}

Unit parse_unit(std::string_view s) {
  if (s == "yoy_percent") return Unit::yoy_percent;
  if (s == "qoq_percent") return Unit::qoq_percent;
  if (s == "index_level") return Unit::index_level;
  throw InvalidArgument("unknown unit '" + std::string(s) + "'");
}

TimeSeries::TimeSeries(std::string id, Unit unit, Period start, Eigen::VectorXd values)
    : id_(std::move(id)), unit_(unit), start_(start), values_(std::move(values)) {
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw DataError("series '" + id_ + "': non-finite value at " + period(i).to_string());
  }
}

std::optional<Eigen::Index> TimeSeries::index_of(Period p) const noexcept {
  auto k = quarters_between(start_, p);
  if (k < 0 || k >= values_.size()) return std::nullopt;
  return static_cast<Eigen::Index>(k);
}

TimeSeries TimeSeries::truncated(Period origin) const {
  auto k = quarters_between(start_, origin);
  if (k < 0) throw InvalidArgument("origin " + origin.to_string() + " precedes series start");
  return head(std::min<Eigen::Index>(k + 1, size()));
}

TimeSeries TimeSeries::head(Eigen::Index n) const {
  TimeSeries out;
  out.id_ = id_;
  out.unit_ = unit_;
  out.start_ = start_;
  out.values_ = values_.head(n);
  return out;
}

TimeSeries TimeSeries::with_values(Eigen::VectorXd values) const {
  return TimeSeries(id_, unit_, start_, std::move(values));
}

TimeSeries TimeSeries::with_unit(Unit u) const {
  auto out = *this;
  out.unit_ = u;
  return out;
}

SliceResult slice(const TimeSeries& s, const Window& w) {
  if (s.empty() || w.end < s.start() || w.start > s.end())
    throw DataError("slice " + w.to_string() + " does not overlap series '" + s.id() + "'");
  const Period lo = std::max(w.start, s.start());
  const Period hi = std::min(w.end, s.end());
  const auto first = *s.index_of(lo);
  const auto n = quarters_between(lo, hi) + 1;
  SliceResult r{TimeSeries(s.id(), s.unit(), lo, s.values().segment(first, n)), false};
  r.truncated = lo != w.start || hi != w.end;
  return r;
}

namespace {

TimeSeries growth_from_level(const TimeSeries& s, Eigen::Index lag, Unit out_unit) {
  if (s.unit() != Unit::index_level)
    throw InvalidArgument("series '" + s.id() + "' is not an index_level series");
  if (s.size() < lag + 1)
    throw InvalidArgument("series '" + s.id() + "' needs at least " + std::to_string(lag + 1) + " observations");
  Eigen::VectorXd g(s.size() - lag);
  for (Eigen::Index t = lag; t < s.size(); ++t) {
    if (s[t - lag] == 0.0)
      throw DataError("division by zero: level at " + s.period(t - lag).to_string() + " is 0 (needed for " +
                      s.period(t).to_string() + ")");
    g[t - lag] = 100.0 * (s[t] / s[t - lag] - 1.0);
  }
  return TimeSeries(s.id(), out_unit, s.period(lag), std::move(g));
}

}  // namespace

TimeSeries yoy_from_level(const TimeSeries& levels) { return growth_from_level(levels, 4, Unit::yoy_percent); }
TimeSeries qoq_from_level(const TimeSeries& levels) { return growth_from_level(levels, 1, Unit::qoq_percent); }

TimeSeries level_from_qoq(const TimeSeries& growth, double base_level) {
  Eigen::VectorXd lv(growth.size());
  double prev = base_level;
  for (Eigen::Index t = 0; t < growth.size(); ++t) {
    prev *= 1.0 + growth[t] / 100.0;
    lv[t] = prev;
  }
  return TimeSeries(growth.id(), Unit::index_level, growth.start(), std::move(lv));
}

}  // namespace macrocast
