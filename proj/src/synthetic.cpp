#include "macrocast/synthetic.hpp"

#include <random>

namespace macrocast {

std::vector<TimeSeries> synthetic_panel(std::uint64_t seed, Period start, int length,
                                        const std::vector<std::string>& ids) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::VectorXd common(length);
  double f = 0.0;
  for (int t = 0; t < length; ++t) common[t] = f = 0.7 * f + z(rng);
  std::vector<TimeSeries> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double mean = 1.5 + 0.5 * static_cast<double>(i);
    const double loading = 1.0 + 0.25 * static_cast<double>(i);
    Eigen::VectorXd v(length);
    double e = 0.0;
    for (int t = 0; t < length; ++t) {
      e = 0.5 * e + 0.6 * z(rng);
      v[t] = mean + loading * common[t] + e;
    }
    out.emplace_back(ids[i], Unit::yoy_percent, start, v);
  }
  return out;
}

}  // namespace macrocast
