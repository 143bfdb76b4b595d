#include "macrocast/kpss.hpp"

#include <cmath>
#include <string>

#include "macrocast/errors.hpp"

namespace macrocast {

double kpss_statistic(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto n = x.size();
  if (n < 2) throw InvalidArgument("KPSS needs at least 2 observations");
  const Eigen::VectorXd e = x.array() - x.mean();
  const double gamma0 = e.squaredNorm() / static_cast<double>(n);
  if (gamma0 <= 1e-24 * (1.0 + x.squaredNorm() / static_cast<double>(n))) return 0.0;  // constant series

  double partial = 0.0;
  double eta = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    partial += e[t];
    eta += partial * partial;
  }
  const int lags = static_cast<int>(std::trunc(4.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
  double s2 = gamma0;
  for (int k = 1; k <= lags && k < n; ++k) {
    const double gk = e.tail(n - k).dot(e.head(n - k)) / static_cast<double>(n);
    s2 += 2.0 * (1.0 - static_cast<double>(k) / (lags + 1.0)) * gk;
  }
  if (s2 <= 0.0) s2 = gamma0;
  return eta / (static_cast<double>(n) * static_cast<double>(n) * s2);
}

double kpss_critical_value(double alpha) {
  if (std::abs(alpha - 0.10) < 1e-12) return 0.347;
  if (std::abs(alpha - 0.05) < 1e-12) return 0.463;
  if (std::abs(alpha - 0.025) < 1e-12) return 0.574;
  if (std::abs(alpha - 0.01) < 1e-12) return 0.739;
  throw InvalidArgument("unsupported KPSS level " + std::to_string(alpha));
}

Eigen::VectorXd difference(const Eigen::Ref<const Eigen::VectorXd>& x, int lag, int times) {
  Eigen::VectorXd out = x;
  for (int i = 0; i < times; ++i) {
    if (out.size() <= lag) return Eigen::VectorXd();
    out = (out.tail(out.size() - lag) - out.head(out.size() - lag)).eval();
  }
  return out;
}

int select_d(const Eigen::Ref<const Eigen::VectorXd>& x, double alpha, int max_d) {
  if (x.size() < 12) throw InvalidArgument("select_d needs at least 12 observations, got " + std::to_string(x.size()));
  const double crit = kpss_critical_value(alpha);
  Eigen::VectorXd w = x;
  for (int d = 0; d < max_d; ++d) {
    if (w.size() < 8)
      throw InvalidArgument("series too short after " + std::to_string(d) + " difference(s): " +
                            std::to_string(w.size()) + " points");
    if (kpss_statistic(w) <= crit) return d;
    w = difference(w);
  }
  if (w.size() < 8)
    throw InvalidArgument("series too short after " + std::to_string(max_d) + " difference(s)");
  return max_d;
}

double seasonal_strength(const Eigen::Ref<const Eigen::VectorXd>& x, int m) {
  const auto n = x.size();
  if (m < 2 || n < 3 * m) return 0.0;
  // Centred moving average of order m (2xm when m is even).
  const int half = m / 2;
  Eigen::VectorXd detrended = Eigen::VectorXd::Constant(n, std::nan(""));
  for (Eigen::Index t = half; t + half < n; ++t) {
    double trend = 0.0;
    if (m % 2 == 0) {
      trend = 0.5 * (x[t - half] + x[t + half]);
      for (int k = -half + 1; k < half; ++k) trend += x[t + k];
    } else {
      for (int k = -half; k <= half; ++k) trend += x[t + k];
    }
    detrended[t] = x[t] - trend / m;
  }
  Eigen::VectorXd index = Eigen::VectorXd::Zero(m);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(m);
  for (Eigen::Index t = half; t + half < n; ++t) {
    index[t % m] += detrended[t];
    ++count[t % m];
  }
  for (int k = 0; k < m; ++k) index[k] /= std::max(1, count[k]);
  index.array() -= index.mean();

  const auto len = n - 2 * half;
  Eigen::VectorXd d = detrended.segment(half, len);
  Eigen::VectorXd r(len);
  for (Eigen::Index i = 0; i < len; ++i) r[i] = d[i] - index[(i + half) % m];
  auto var = [](const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().sum() / (v.size() - 1.0); };
  const double vd = var(d);
  if (vd <= 0.0) return 0.0;
  return std::max(0.0, 1.0 - var(r) / vd);
}

}  // namespace macrocast
