#include "macrocast/arima.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "macrocast/errors.hpp"
#include "macrocast/kpss.hpp"
#include "macrocast/optim.hpp"

namespace macrocast {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Product of two polynomials given by coefficient vectors (index = power).
Eigen::VectorXd poly_mul(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i, b.size()) += a[i] * b;
  return out;
}

// 1 + sign * sum c_i B^(lag*i)
Eigen::VectorXd lag_poly(const Eigen::VectorXd& c, int lag, double sign) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(c.size() * lag + 1);
  out[0] = 1.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) out[(i + 1) * lag] = sign * c[i];
  return out;
}

// Coefficients of (1-B)^d (1-B^m)^D, leading 1.
Eigen::VectorXd differencing_poly(int d, int D, int m) {
  Eigen::VectorXd poly = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd one(2);
  one << 1.0, -1.0;
  for (int i = 0; i < d; ++i) poly = poly_mul(poly, one);
  Eigen::VectorXd seas = Eigen::VectorXd::Zero(m + 1);
  seas[0] = 1.0;
  seas[m] = -1.0;
  for (int i = 0; i < D; ++i) poly = poly_mul(poly, seas);
  return poly;
}

Eigen::VectorXd apply_differencing(const Eigen::VectorXd& y, const Eigen::VectorXd& delta) {
  const auto nd = delta.size() - 1;
  if (y.size() <= nd) return Eigen::VectorXd();
  Eigen::VectorXd w(y.size() - nd);
  for (Eigen::Index t = 0; t < w.size(); ++t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i <= nd; ++i) s += delta[i] * y[t + nd - i];
    w[t] = s;
  }
  return w;
}

struct Coefficients {
  Eigen::VectorXd ar, ma, sar, sma;
  double mean = 0.0;
};

struct Expanded {
  Eigen::VectorXd phi;    // x_t = sum phi_i x_{t-i} + e_t + sum theta_j e_{t-j}
  Eigen::VectorXd theta;
};

Expanded expand(const Coefficients& c, int m) {
  const Eigen::VectorXd ar = poly_mul(lag_poly(c.ar, 1, -1.0), lag_poly(c.sar, m, -1.0));
  const Eigen::VectorXd ma = poly_mul(lag_poly(c.ma, 1, 1.0), lag_poly(c.sma, m, 1.0));
  return {-ar.tail(ar.size() - 1), ma.tail(ma.size() - 1)};
}

struct FilterResult {
  double sum_sq = 0.0;     // sum v_t^2 / F_t
  double sum_log_f = 0.0;  // sum log F_t
  Eigen::VectorXd state;   // a_{n+1|n}
  Eigen::VectorXd predictions;
  bool ok = true;
};

// Kalman filter for a zero-mean ARMA in Harvey's state-space form with unit
// innovation variance. The transition matrix is a companion shift, so the
// covariance propagation is done in O(r^2) per step.
class ArmaFilter {
 public:
  explicit ArmaFilter(const Expanded& e) {
    r_ = std::max<Eigen::Index>(e.phi.size(), e.theta.size() + 1);
    phi_ = Eigen::VectorXd::Zero(r_);
    phi_.head(e.phi.size()) = e.phi;
    R_ = Eigen::VectorXd::Zero(r_);
    R_[0] = 1.0;
    R_.segment(1, e.theta.size()) = e.theta;
    RRt_ = R_ * R_.transpose();
  }

  [[nodiscard]] Eigen::Index dim() const noexcept { return r_; }

  Eigen::VectorXd transition(const Eigen::VectorXd& a) const {
    Eigen::VectorXd out = phi_ * a[0];
    out.head(r_ - 1) += a.tail(r_ - 1);
    return out;
  }

  // T P T' + R R'
  Eigen::MatrixXd propagate(const Eigen::MatrixXd& P) const {
    Eigen::MatrixXd M = phi_ * P.row(0);
    M.topRows(r_ - 1) += P.bottomRows(r_ - 1);
    Eigen::MatrixXd out = M.col(0) * phi_.transpose();
    out.leftCols(r_ - 1) += M.rightCols(r_ - 1);
    out += RRt_;
    return out;
  }

  // Stationary covariance: P = T P T' + R R', solved by doubling.
  Eigen::MatrixXd initial_covariance() const {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(r_, r_);
    T.col(0) = phi_;
    for (Eigen::Index i = 0; i + 1 < r_; ++i) T(i, i + 1) = 1.0;
    Eigen::MatrixXd P = RRt_;
    Eigen::MatrixXd A = T;
    for (int it = 0; it < 64; ++it) {
      const Eigen::MatrixXd inc = A * P * A.transpose();
      P += inc;
      if (inc.lpNorm<Eigen::Infinity>() <= 1e-15 * P.lpNorm<Eigen::Infinity>()) break;
      A = (A * A).eval();
    }
    return P;
  }

  FilterResult run(const Eigen::VectorXd& x, bool keep_predictions) const {
    FilterResult res;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(r_);
    Eigen::MatrixXd P = initial_covariance();
    if (keep_predictions) res.predictions.resize(x.size());
    for (Eigen::Index t = 0; t < x.size(); ++t) {
      if (keep_predictions) res.predictions[t] = a[0];
      const double F = P(0, 0);
      if (!(F > 0.0) || !std::isfinite(F)) {
        res.ok = false;
        return res;
      }
      const double v = x[t] - a[0];
      res.sum_sq += v * v / F;
      res.sum_log_f += std::log(F);
      const Eigen::VectorXd k = P.col(0) / F;
      a += k * v;
      P -= k * P.row(0);
      a = transition(a);
      P = propagate(P);
    }
    res.state = std::move(a);
    return res;
  }

 private:
  Eigen::Index r_ = 1;
  Eigen::VectorXd phi_, R_;
  Eigen::MatrixXd RRt_;
};

struct Problem {
  ArimaSpec spec;
  Eigen::VectorXd w;  // differenced series
  double mean0 = 0.0;
  double scale = 1.0;

  [[nodiscard]] Eigen::Index size() const { return spec.coefficient_count(); }

  Coefficients decode(const Eigen::VectorXd& u) const {
    Coefficients c;
    Eigen::Index k = 0;
    c.ar = pacf_to_coefficients(u.segment(k, spec.p));
    k += spec.p;
    c.ma = -pacf_to_coefficients(u.segment(k, spec.q));
    k += spec.q;
    c.sar = pacf_to_coefficients(u.segment(k, spec.P));
    k += spec.P;
    c.sma = -pacf_to_coefficients(u.segment(k, spec.Q));
    k += spec.Q;
    c.mean = spec.with_constant ? mean0 + scale * u[k] : 0.0;
    return c;
  }

  double css(const Eigen::VectorXd& u) const {
    const auto c = decode(u);
    const auto e = expand(c, spec.m);
    const Eigen::Index pf = e.phi.size(), qf = e.theta.size();
    const Eigen::VectorXd x = w.array() - c.mean;
    Eigen::VectorXd resid = Eigen::VectorXd::Zero(x.size());
    double ss = 0.0;
    for (Eigen::Index t = pf; t < x.size(); ++t) {
      double v = x[t];
      for (Eigen::Index i = 0; i < pf; ++i) v -= e.phi[i] * x[t - 1 - i];
      for (Eigen::Index j = 0; j < qf && t - 1 - j >= 0; ++j) v -= e.theta[j] * resid[t - 1 - j];
      resid[t] = v;
      ss += v * v;
    }
    const auto count = x.size() - pf;
    if (count <= 0 || !std::isfinite(ss)) return kInf;
    return 0.5 * std::log(std::max(ss / static_cast<double>(count), 1e-300));
  }

  double sigma2_floor() const { return 1e-14 * (1.0 + w.squaredNorm() / static_cast<double>(w.size())); }

  double ml(const Eigen::VectorXd& u) const {
    const auto c = decode(u);
    const ArmaFilter filter(expand(c, spec.m));
    const Eigen::VectorXd x = w.array() - c.mean;
    const auto r = filter.run(x, false);
    if (!r.ok || !std::isfinite(r.sum_sq)) return kInf;
    const double n = static_cast<double>(w.size());
    const double s2 = std::max(r.sum_sq / n, sigma2_floor());
    return 0.5 * (std::log(s2) + r.sum_log_f / n);
  }
};

bool admissible(const Coefficients& c) {
  return roots_outside_unit_circle(c.ar) && roots_outside_unit_circle(-c.ma) && roots_outside_unit_circle(c.sar) &&
         roots_outside_unit_circle(-c.sma);
}

struct Prepared {
  Eigen::VectorXd delta;
  Eigen::VectorXd w;
};

Prepared prepare(const ArimaSpec& spec, const TimeSeries& history) {
  Prepared p;
  p.delta = differencing_poly(spec.d, spec.D, spec.m);
  p.w = apply_differencing(history.values(), p.delta);
  return p;
}

Coefficients coefficients_of(const ArimaFit& fit) {
  return Coefficients{fit.ar, fit.ma, fit.sar, fit.sma, fit.constant};
}

}  // namespace

void ArimaSpec::validate() const {
  if (p < 0 || q < 0 || P < 0 || Q < 0 || d < 0 || D < 0) throw InvalidArgument("negative ARIMA order in " + to_string());
  if (d > 2) throw InvalidArgument("d must be <= 2 in " + to_string());
  if (D > 1) throw InvalidArgument("D must be <= 1 in " + to_string());
  if (p > 5 || q > 5) throw InvalidArgument("p and q must be <= 5 in " + to_string());
  if (P > 2 || Q > 2) throw InvalidArgument("P and Q must be <= 2 in " + to_string());
  if (m < 1) throw InvalidArgument("seasonal period must be >= 1");
}

std::string ArimaSpec::to_string() const {
  std::ostringstream os;
  os << "ARIMA(" << p << ',' << d << ',' << q << ")(" << P << ',' << D << ',' << Q << ")[" << m << ']'
     << (with_constant ? " with constant" : "");
  return os.str();
}

Eigen::VectorXd pacf_to_coefficients(const Eigen::Ref<const Eigen::VectorXd>& raw) {
  const auto p = raw.size();
  Eigen::VectorXd out = raw.array().tanh();
  Eigen::VectorXd work = out;
  for (Eigen::Index j = 1; j < p; ++j) {
    const double a = out[j];
    for (Eigen::Index k = 0; k < j; ++k) work[k] -= a * out[j - k - 1];
    out.head(j) = work.head(j);
  }
  return out;
}

bool roots_outside_unit_circle(const Eigen::Ref<const Eigen::VectorXd>& coeffs, double margin) {
  Eigen::Index n = coeffs.size();
  while (n > 0 && std::abs(coeffs[n - 1]) < 1e-12) --n;
  if (n == 0) return true;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  companion.row(0) = coeffs.head(n).transpose();
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) return false;
  // Eigenvalues of the companion matrix are reciprocals of the polynomial roots.
  return solver.eigenvalues().cwiseAbs().maxCoeff() < 1.0 / margin;
}

ArimaFit fit_arima(const TimeSeries& history, const ArimaSpec& spec) {
  spec.validate();
  const auto prep = prepare(spec, history);
  const auto& w = prep.w;
  const Eigen::Index k = spec.coefficient_count();
  if (w.size() < std::max<Eigen::Index>(k + 2, 3))
    throw FitError(spec.to_string() + ": too few observations after differencing (" + std::to_string(w.size()) + ")");

  Problem prob;
  prob.spec = spec;
  prob.w = w;
  if (spec.with_constant) {
    prob.mean0 = w.mean();
    const double sd = std::sqrt((w.array() - prob.mean0).square().sum() / static_cast<double>(w.size()));
    prob.scale = sd > 0.0 ? sd : 1.0;
  }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
  if (k > 0) {
    BfgsOptions css_opts;
    css_opts.max_iterations = 100;
    auto css = minimize_bfgs([&](const Eigen::VectorXd& v) { return prob.css(v); }, u, css_opts);
    if (std::isfinite(css.value) && css.x.allFinite() && std::isfinite(prob.ml(css.x))) u = css.x;
    auto ml = minimize_bfgs([&](const Eigen::VectorXd& v) { return prob.ml(v); }, u);
    if (!std::isfinite(ml.value) || !ml.x.allFinite()) throw FitError(spec.to_string() + ": likelihood optimisation failed");
    u = ml.x;
  }

  const auto c = prob.decode(u);
  if (!admissible(c)) throw FitError(spec.to_string() + ": fitted polynomials have roots inside 1.01");

  const ArmaFilter filter(expand(c, spec.m));
  const Eigen::VectorXd x = w.array() - c.mean;
  const auto r = filter.run(x, false);
  if (!r.ok) throw FitError(spec.to_string() + ": Kalman filter breakdown");
  const double n = static_cast<double>(w.size());

  ArimaFit fit;
  fit.spec = spec;
  fit.ar = c.ar;
  fit.ma = c.ma;
  fit.sar = c.sar;
  fit.sma = c.sma;
  fit.constant = c.mean;
  fit.sigma2 = std::max(r.sum_sq / n, prob.sigma2_floor());
  fit.loglik = -0.5 * (n * std::log(2.0 * std::numbers::pi * fit.sigma2) + r.sum_log_f + n);
  const double npar = static_cast<double>(k + 1);
  fit.aicc = n - npar - 1.0 > 0.0 ? -2.0 * fit.loglik + 2.0 * npar + 2.0 * npar * (npar + 1.0) / (n - npar - 1.0) : kInf;
  fit.n_obs = history.size();
  return fit;
}

Eigen::VectorXd arima_forecast(const ArimaFit& fit, const TimeSeries& history, int horizon) {
  if (horizon < 1) throw InvalidArgument("arima_forecast: horizon must be >= 1");
  if (history.size() != fit.n_obs)
    throw InvalidArgument("arima_forecast: history length " + std::to_string(history.size()) +
                          " does not match fitted length " + std::to_string(fit.n_obs));
  const auto prep = prepare(fit.spec, history);
  const auto c = coefficients_of(fit);
  const ArmaFilter filter(expand(c, fit.spec.m));
  const Eigen::VectorXd x = prep.w.array() - c.mean;
  auto r = filter.run(x, false);
  if (!r.ok) throw FitError("arima_forecast: Kalman filter breakdown");

  const auto n = history.size();
  const auto nd = prep.delta.size() - 1;
  Eigen::VectorXd y(n + horizon);
  y.head(n) = history.values();
  Eigen::VectorXd a = r.state;
  for (int h = 0; h < horizon; ++h) {
    double value = c.mean + a[0];
    for (Eigen::Index i = 1; i <= nd; ++i) value -= prep.delta[i] * y[n + h - i];
    y[n + h] = value;
    a = filter.transition(a);
  }
  return y.tail(horizon);
}

ArimaFit arima_extend(const ArimaFit& fit, const TimeSeries& history) {
  if (history.size() < fit.n_obs) throw InvalidArgument("arima_extend: history is shorter than the fitted sample");
  auto out = fit;
  out.n_obs = history.size();
  return out;
}

Eigen::VectorXd arima_fitted(const ArimaFit& fit, const TimeSeries& history) {
  const auto prep = prepare(fit.spec, history);
  const auto c = coefficients_of(fit);
  const ArmaFilter filter(expand(c, fit.spec.m));
  const Eigen::VectorXd x = prep.w.array() - c.mean;
  auto r = filter.run(x, true);
  if (!r.ok) throw FitError("arima_fitted: Kalman filter breakdown");
  const auto n = history.size();
  const auto nd = prep.delta.size() - 1;
  Eigen::VectorXd out = Eigen::VectorXd::Constant(n, std::nan(""));
  for (Eigen::Index t = nd; t < n; ++t) {
    double value = c.mean + r.predictions[t - nd];
    for (Eigen::Index i = 1; i <= nd; ++i) value -= prep.delta[i] * history[t - i];
    out[t] = value;
  }
  return out;
}

namespace {

// Strict weak order on (aicc, parameter count, q, p) with an AICc tolerance.
bool preferred(const ArimaCandidate& a, const ArimaCandidate& b) {
  if (!std::isfinite(a.aicc)) return false;
  if (!std::isfinite(b.aicc)) return true;
  if (a.aicc < b.aicc - 1e-8) return true;
  if (b.aicc < a.aicc - 1e-8) return false;
  return std::make_tuple(a.spec.coefficient_count(), a.spec.q, a.spec.p) <
         std::make_tuple(b.spec.coefficient_count(), b.spec.q, b.spec.p);
}

}  // namespace

AutoArimaResult auto_arima_search(const TimeSeries& history, const AutoArimaOptions& opt) {
  if (history.size() < 16)
    throw InvalidArgument("auto_arima needs at least 16 observations, got " + std::to_string(history.size()));
  AutoArimaResult result;
  const bool seasonal = opt.seasonal && opt.m > 1;
  int D = 0;
  if (seasonal) {
    result.seasonal_strength = seasonal_strength(history.values(), opt.m);
    if (opt.max_D >= 1 && result.seasonal_strength >= opt.seasonal_strength_threshold) D = 1;
  }
  Eigen::VectorXd base = history.values();
  if (D == 1) base = difference(base, opt.m, 1);
  int d = 0;
  if (base.size() >= 12) d = select_d(base, opt.kpss_alpha, opt.max_d);
  const bool allow_constant = d + D <= 1;

  auto within = [&](const ArimaSpec& s) {
    if (s.p < 0 || s.q < 0 || s.P < 0 || s.Q < 0) return false;
    if (s.p > opt.max_p || s.q > opt.max_q || s.P > opt.max_P || s.Q > opt.max_Q) return false;
    if (!seasonal && (s.P > 0 || s.Q > 0)) return false;
    if (opt.max_order > 0 && s.p + s.q + s.P + s.Q > opt.max_order) return false;
    if (s.with_constant && !allow_constant) return false;
    return true;
  };

  std::map<std::string, std::size_t> seen;
  std::map<std::string, ArimaFit> fits;
  auto evaluate = [&](const ArimaSpec& s) -> const ArimaCandidate* {
    const auto key = s.to_string();
    if (auto it = seen.find(key); it != seen.end()) return &result.log[it->second];
    ArimaCandidate cand{s, kInf, {}};
    try {
      auto fit = fit_arima(history, s);
      cand.aicc = fit.aicc;
      if (!std::isfinite(fit.aicc)) cand.note = "AICc undefined";
      else fits.emplace(key, std::move(fit));
    } catch (const std::exception& e) {
      cand.note = e.what();
    }
    seen.emplace(key, result.log.size());
    result.log.push_back(std::move(cand));
    return &result.log.back();
  };

  auto make = [&](int p, int q, int P, int Q, bool c) {
    ArimaSpec s;
    s.p = p;
    s.d = d;
    s.q = q;
    s.P = seasonal ? P : 0;
    s.D = D;
    s.Q = seasonal ? Q : 0;
    s.m = opt.m;
    s.with_constant = c;
    return s;
  };

  std::vector<ArimaSpec> starts = {make(2, 2, 1, 1, allow_constant), make(0, 0, 0, 0, allow_constant),
                                   make(1, 0, 1, 0, allow_constant), make(0, 1, 0, 1, allow_constant)};
  std::optional<ArimaCandidate> best;
  for (auto s : starts) {
    s.p = std::min(s.p, opt.max_p);
    s.q = std::min(s.q, opt.max_q);
    s.P = std::min(s.P, opt.max_P);
    s.Q = std::min(s.Q, opt.max_Q);
    if (!within(s)) continue;
    const auto* c = evaluate(s);
    if (!best || preferred(*c, *best)) best = *c;
  }
  if (allow_constant) {
    const auto* c = evaluate(make(0, 0, 0, 0, false));
    if (!best || preferred(*c, *best)) best = *c;
  }

  int steps = 0;
  bool improved = true;
  while (improved && best && std::isfinite(best->aicc) && steps < opt.max_steps) {
    improved = false;
    const auto b = best->spec;
    const std::vector<ArimaSpec> moves = {
        make(b.p, b.q, b.P - 1, b.Q, b.with_constant),         make(b.p, b.q, b.P + 1, b.Q, b.with_constant),
        make(b.p, b.q, b.P, b.Q - 1, b.with_constant),         make(b.p, b.q, b.P, b.Q + 1, b.with_constant),
        make(b.p, b.q, b.P - 1, b.Q - 1, b.with_constant),     make(b.p, b.q, b.P + 1, b.Q + 1, b.with_constant),
        make(b.p - 1, b.q, b.P, b.Q, b.with_constant),         make(b.p + 1, b.q, b.P, b.Q, b.with_constant),
        make(b.p, b.q - 1, b.P, b.Q, b.with_constant),         make(b.p, b.q + 1, b.P, b.Q, b.with_constant),
        make(b.p - 1, b.q - 1, b.P, b.Q, b.with_constant),     make(b.p + 1, b.q + 1, b.P, b.Q, b.with_constant),
        make(b.p, b.q, b.P, b.Q, !b.with_constant),
    };
    for (const auto& s : moves) {
      if (!within(s) || seen.count(s.to_string())) continue;
      ++steps;
      const auto* c = evaluate(s);
      if (preferred(*c, *best)) {
        best = *c;
        improved = true;
        break;
      }
      if (steps >= opt.max_steps) break;
    }
  }

  if (!best || !std::isfinite(best->aicc)) {
    std::string tried;
    for (const auto& c : result.log) tried += "\n  " + c.spec.to_string() + ": " + c.note;
    throw FitError("auto_arima: no candidate model could be estimated; attempted:" + tried);
  }
  result.fit = fits.at(best->spec.to_string());
  return result;
}

ArimaFit auto_arima(const TimeSeries& history, const AutoArimaOptions& options) {
  return auto_arima_search(history, options).fit;
}

}  // namespace macrocast
