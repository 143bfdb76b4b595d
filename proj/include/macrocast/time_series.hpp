#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <string_view>

#include "macrocast/period.hpp"

namespace macrocast {

enum class Unit { yoy_percent, qoq_percent, index_level };

std::string_view to_string(Unit u) noexcept;
Unit parse_unit(std::string_view s);

/// Contiguous quarterly series. Immutable once built; all values finite.
class TimeSeries {
 public:
  TimeSeries() = default;
  /// Throws DataError if any value is non-finite.
  TimeSeries(std::string id, Unit unit, Period start, Eigen::VectorXd values);

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] Unit unit() const noexcept { return unit_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return values_.size(); }
  [[nodiscard]] bool empty() const noexcept { return values_.size() == 0; }
  [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }
  [[nodiscard]] double operator[](Eigen::Index i) const { return values_[i]; }
  [[nodiscard]] double back() const { return values_[values_.size() - 1]; }

  [[nodiscard]] Period start() const noexcept { return start_; }
  /// Last period; only meaningful when non-empty.
  [[nodiscard]] Period end() const noexcept { return start_.shifted(values_.size() - 1); }
  [[nodiscard]] Period period(Eigen::Index i) const noexcept { return start_.shifted(i); }
  [[nodiscard]] std::optional<Eigen::Index> index_of(Period p) const noexcept;
  [[nodiscard]] Window span() const { return Window(start(), end()); }

  /// Observations up to and including `origin`. Throws if origin precedes the start.
  [[nodiscard]] TimeSeries truncated(Period origin) const;
  /// First `n` observations.
  [[nodiscard]] TimeSeries head(Eigen::Index n) const;
  [[nodiscard]] TimeSeries with_values(Eigen::VectorXd values) const;
  [[nodiscard]] TimeSeries with_unit(Unit u) const;

  friend bool operator==(const TimeSeries& a, const TimeSeries& b) {
    return a.id_ == b.id_ && a.unit_ == b.unit_ && a.start_ == b.start_ && a.values_ == b.values_;
  }

 private:
  std::string id_;
  Unit unit_ = Unit::yoy_percent;
  Period start_;
  Eigen::VectorXd values_;
};

struct SliceResult {
  TimeSeries series;
  bool truncated = false;  // window extended past the series span
};

/// Observations inside `w`. Partial overlap returns the intersection with
/// `truncated` set; empty overlap throws DataError.
SliceResult slice(const TimeSeries& s, const Window& w);

/// 100 * (L_t / L_{t-4} - 1); output begins four quarters after the input.
TimeSeries yoy_from_level(const TimeSeries& levels);
/// 100 * (L_t / L_{t-1} - 1).
TimeSeries qoq_from_level(const TimeSeries& levels);
/// Inverse of qoq_from_level given the level at the period before the first growth value.
TimeSeries level_from_qoq(const TimeSeries& growth, double base_level);

}  // namespace macrocast
