#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "macrocast/time_series.hpp"

namespace macrocast {

/// Growth-like panel: a shared AR(1) factor plus idiosyncratic AR(1) noise per
/// series, around a series-specific mean. Deterministic in `seed`.
std::vector<TimeSeries> synthetic_panel(std::uint64_t seed, Period start, int length,
                                        const std::vector<std::string>& ids = {"GDP", "Primary", "Goods",
                                                                               "Services"});

}  // namespace macrocast
