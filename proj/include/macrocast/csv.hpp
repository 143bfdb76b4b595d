#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "macrocast/time_series.hpp"

namespace macrocast {

/// Parses `period,series_id,value` CSV text. Series are returned in order of
/// first appearance; rows within a series may arrive in any order. Gaps,
/// duplicates, malformed periods and non-numeric values throw DataError
/// naming the 1-based line number.
std::vector<TimeSeries> ingest_csv(std::string_view text, Unit unit = Unit::yoy_percent);
std::vector<TimeSeries> ingest_csv_file(const std::string& path, Unit unit = Unit::yoy_percent);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

void write_csv(std::ostream& os, const std::vector<TimeSeries>& series);
std::string to_csv(const std::vector<TimeSeries>& series);

}  // namespace macrocast
