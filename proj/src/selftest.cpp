#include "macrocast/selftest.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include "macrocast/arima.hpp"
#include "macrocast/backtest.hpp"
#include "macrocast/cli.hpp"
#include "macrocast/csv.hpp"
#include "macrocast/factor_model.hpp"
#include "macrocast/gateway.hpp"
#include "macrocast/lsboost.hpp"
#include "macrocast/persistence.hpp"
#include "macrocast/report.hpp"
#include "macrocast/synthetic.hpp"

namespace macrocast {

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  CriterionStatus status() const { return pass ? CriterionStatus::pass : CriterionStatus::fail; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

Eigen::VectorXd normals(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

TimeSeries series_of(const Eigen::VectorXd& v, std::string id = "x", Period start = Period{1990, 1}) {
  return TimeSeries(std::move(id), Unit::yoy_percent, start, v);
}

Outcome metric_oracles(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(5, 80);
  std::uniform_real_distribution<double> scale(0.01, 50.0);
  int worst_case = -1;
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const int n = len(rng);
    const double s = scale(rng);
    const Eigen::VectorXd a = normals(rng, n, s), f = normals(rng, n, s);
    const Eigen::VectorXd train = normals(rng, n + 10, s);
    const int m = c % 2 == 0 ? 1 : 4;
    // Independent loop oracles.
    double sa = 0.0, ss = 0.0, sp = 0.0, sd = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = a[i] - f[i];
      sa += std::abs(e);
      ss += e * e;
      const double den = std::abs(a[i]) + std::abs(f[i]);
      sp += den == 0.0 ? 0.0 : 2.0 * std::abs(e) / den;
    }
    for (Eigen::Index t = m; t < train.size(); ++t) sd += std::abs(train[t] - train[t - m]);
    const double o_mae = sa / n, o_mse = ss / n, o_rmse = std::sqrt(ss / n), o_smape = 100.0 * sp / n;
    const double o_mase = o_mae / (sd / static_cast<double>(train.size() - m));

    const ErrorSample e(a, f);
    const double g[] = {mae(e), mse(e), rmse(e), smape(e), mase(e, series_of(train), m)};
    const double w[] = {o_mae, o_mse, o_rmse, o_smape, o_mase};
    for (int k = 0; k < 5; ++k) {
      const double dev = std::abs(g[k] - w[k]) / std::max(1.0, std::abs(w[k]));
      if (dev > worst) {
        worst = dev;
        worst_case = c;
      }
    }
    if (!(g[3] >= 0.0 && g[3] <= 200.0)) return {false, "SMAPE outside [0, 200] in case " + std::to_string(c)};
    if (!(g[0] <= g[2])) return {false, "MAE > RMSE in case " + std::to_string(c)};
  }
  if (worst > 1e-12)
    return {false, "max scaled deviation " + fmt("%.3g", worst) + " in case " + std::to_string(worst_case)};
  return {true, "1000 fixtures, max scaled deviation " + fmt("%.3g", worst) + " (tol 1e-12); SMAPE in [0,200], MAE <= RMSE"};
}

// DM statistic straight from the definition, one loop per autocovariance.
double dm_brute_force(const Eigen::VectorXd& d, int h) {
  const auto T = static_cast<double>(d.size());
  double mean = 0.0;
  for (Eigen::Index t = 0; t < d.size(); ++t) mean += d[t];
  mean /= T;
  auto gamma = [&](int k) {
    double s = 0.0;
    for (Eigen::Index t = k; t < d.size(); ++t) s += (d[t] - mean) * (d[t - k] - mean);
    return s / T;
  };
  double var = gamma(0);
  for (int k = 1; k <= h - 1; ++k) var += 2.0 * (1.0 - static_cast<double>(k) / h) * gamma(k);
  return mean / std::sqrt(var / T);
}

Outcome dm_correctness(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(20, 200);
  double worst_stat = 0.0, worst_p = 0.0;
  int cases = 0;
  for (int h : {1, 2, 4}) {
    for (int c = 0; c < 500; ++c, ++cases) {
      const int n = len(rng);
      const Eigen::VectorXd y = normals(rng, n);
      // Autocorrelated forecast errors so the lag terms matter for h > 1.
      Eigen::VectorXd u1 = normals(rng, n), u2 = normals(rng, n, 1.1);
      for (int t = 1; t < n; ++t) {
        u1[t] += 0.5 * u1[t - 1];
        u2[t] += 0.3 * u2[t - 1];
      }
      const ErrorSample e1(y, y + u1), e2(y, y + u2);
      const auto ld = loss_differential(e1, e2, Loss::squared, h);
      Eigen::VectorXd d(n);
      for (int t = 0; t < n; ++t) d[t] = u1[t] * u1[t] - u2[t] * u2[t];
      const double want = dm_brute_force(d, h);
      const double want_p = std::erfc(std::abs(want) / std::sqrt(2.0));
      const auto res = dm_statistic(ld);
      if (res.variance_fallback) return {false, "unexpected variance fallback in case " + std::to_string(cases)};
      worst_stat = std::max(worst_stat, std::abs(res.statistic - want) / std::max(1.0, std::abs(want)));
      worst_p = std::max(worst_p, std::abs(res.p_value - want_p));

      const auto swapped = dm_statistic(loss_differential(e2, e1, Loss::squared, h));
      if (swapped.statistic != -res.statistic || swapped.p_value != res.p_value)
        return {false, "antisymmetry broken in case " + std::to_string(cases)};
    }
  }
  if (worst_stat > 1e-10 || worst_p > 1e-10)
    return {false, "max deviation statistic " + fmt("%.3g", worst_stat) + ", p " + fmt("%.3g", worst_p)};

  // Size under the null: same process, independent equal-variance noise, h = 1.
  int rejections = 0;
  for (int c = 0; c < 2000; ++c) {
    const int n = 100;
    const Eigen::VectorXd y = normals(rng, n);
    const ErrorSample e1(y, y + normals(rng, n)), e2(y, y + normals(rng, n));
    if (significant(dm_statistic(loss_differential(e1, e2, Loss::squared, 1)).p_value)) ++rejections;
  }
  const double rate = rejections / 2000.0;
  const bool size_ok = rate >= 0.03 && rate <= 0.08;
  return {size_ok, std::to_string(cases) + " cases h in {1,2,4}: max deviation " + fmt("%.3g", worst_stat) +
                       " (tol 1e-10); antisymmetry exact; null rejection rate " + fmt("%.4f", rate) +
                       " (want [0.03, 0.08])"};
}

Outcome arima_recovery(std::uint64_t seed) {
  int hits = 0;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(k));
    const Eigen::VectorXd e = normals(rng, 600);
    Eigen::VectorXd y(600);
    y[0] = e[0];
    for (int t = 1; t < 600; ++t) y[t] = 0.8 * y[t - 1] + e[t];
    const Eigen::VectorXd v = y.tail(500);
    const auto s = series_of(v);
    const auto fit = auto_arima(s);
    const auto fitted = arima_fitted(fit, s);
    double sel = 0.0, truth = 0.0;
    for (Eigen::Index t = 3; t < v.size(); ++t) {
      sel += (v[t] - fitted[t]) * (v[t] - fitted[t]);
      truth += (v[t] - 0.8 * v[t - 1]) * (v[t] - 0.8 * v[t - 1]);
    }
    const double ratio = sel / truth;
    worst = std::max(worst, std::abs(ratio - 1.0));
    if (std::abs(ratio - 1.0) <= 0.05) ++hits;
  }
  // Random walk (0,1,0) forecasts must equal persistence exactly.
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  bool rw_exact = true;
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd v = normals(rng, 60);
    for (Eigen::Index t = 1; t < v.size(); ++t) v[t] += v[t - 1];
    const auto s = series_of(v);
    ArimaSpec rw;
    rw.d = 1;
    const auto fc = arima_forecast(fit_arima(s, rw), s, 8);
    const auto pf = persistence_forecast(s, 8);
    for (int h = 0; h < 8; ++h) rw_exact = rw_exact && same_bits(fc[h], pf[h]);
  }
  return {hits >= 45 && rw_exact, std::to_string(hits) + "/50 seeds with in-sample MSE within 5% of the true model (need 45; worst " +
                                      fmt("%.2f", 100.0 * worst) + "%); random walk == persistence " +
                                      (rw_exact ? "exactly" : "NOT exactly")};
}

Outcome lsboost_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(20, 120), width(1, 5);
  std::uniform_real_distribution<double> shrink(0.05, 1.0);
  double worst_f0 = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int n = len(rng), p = width(rng);
    Eigen::MatrixXd X(n, p);
    for (int j = 0; j < p; ++j) X.col(j) = normals(rng, n);
    Eigen::VectorXd y = normals(rng, n, 0.3);
    for (int i = 0; i < n; ++i) y[i] += std::sin(2.0 * X(i, 0)) + (p > 1 ? X(i, 1) * X(i, 1) : 0.0);
    const double nu = shrink(rng);
    const auto m = fit_lsboost(X, y, 60, nu);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += y[i];
    mean /= n;
    worst_f0 = std::max(worst_f0, std::abs(m.f0 - mean));
    // Replay the ensemble stage by stage; the training loss may never rise.
    Eigen::VectorXd F = Eigen::VectorXd::Constant(n, m.f0);
    double prev = (y - F).squaredNorm() / n;
    for (const auto& st : m.stages) {
      for (int i = 0; i < n; ++i)
        F[i] += m.shrinkage * st.rho *
                (X(i, st.learner.feature_index) <= st.learner.threshold ? st.learner.left_value
                                                                        : st.learner.right_value);
      const double cur = (y - F).squaredNorm() / n;
      if (cur > prev * (1.0 + 1e-12) + 1e-15)
        return {false, "training MSE rose in fixture " + std::to_string(c) + ": " + fmt("%.17g", prev) + " -> " +
                           fmt("%.17g", cur)};
      prev = cur;
    }
  }
  if (worst_f0 > 1e-12) return {false, "F0 differs from the target mean by " + fmt("%.3g", worst_f0)};

  // Separable: the target is a two-level step in one feature; two more features are noise.
  Eigen::MatrixXd X(60, 3);
  Eigen::VectorXd y(60);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = unit(rng);
    y[i] = X(i, 0) < 0.4 ? -3.0 : 7.0;
  }
  const auto sep = fit_lsboost(X, y, 5, 1.0);
  const double sep_mse = sep.training_mse.back();
  return {sep_mse < 1e-6, "100 fixtures non-increasing; max |F0 - mean| " + fmt("%.3g", worst_f0) +
                              "; separable training MSE " + fmt("%.3g", sep_mse) + " (want < 1e-6)"};
}

std::vector<TimeSeries> panel_from(const Eigen::MatrixXd& X) {
  std::vector<TimeSeries> out;
  for (Eigen::Index j = 0; j < X.cols(); ++j) out.push_back(series_of(X.col(j), "s" + std::to_string(j)));
  return out;
}

Outcome factor_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Identical series.
  const Eigen::VectorXd x = normals(rng, 60);
  Eigen::MatrixXd same(60, 5);
  for (int j = 0; j < 5; ++j) same.col(j) = x;
  const auto same_panel = make_panel(panel_from(same));
  const int r_same = choose_factor_count(same_panel);
  const double share = extract_factors(same_panel, 1).explained_share[0];
  const bool one_factor = r_same == 1 && std::abs(share - 1.0) < 1e-12;

  // Two VAR(1) factors, Phi = 0.7 I, loaded on ten series with small noise.
  const int T = 500, N = 10;
  Eigen::MatrixXd F(T + 100, 2);
  F.row(0) = normals(rng, 2).transpose();
  for (int t = 1; t < T + 100; ++t) F.row(t) = 0.7 * F.row(t - 1) + normals(rng, 2).transpose();
  Eigen::MatrixXd L(N, 2);
  for (int i = 0; i < N; ++i) L.row(i) = normals(rng, 2).transpose();
  Eigen::MatrixXd X = F.bottomRows(T) * L.transpose();
  for (int j = 0; j < N; ++j) X.col(j) += normals(rng, T, 0.1);
  const auto var = fit_factor_var(extract_factors(make_panel(panel_from(X)), 2), 1);
  const double var_dev = (var.var_coeffs[0] - 0.7 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff();

  // Reconstruction with as many factors as series.
  Eigen::MatrixXd W(80, 6);
  for (int j = 0; j < 6; ++j) W.col(j) = normals(rng, 80, 1.0 + j);
  const auto wp = make_panel(panel_from(W));
  const auto full = extract_factors(wp, 6);
  const double rec = (full.factors * full.loadings.transpose() - wp.transformed).cwiseAbs().maxCoeff();

  return {one_factor && var_dev < 0.1 && rec < 1e-8,
          "identical panel: r=" + std::to_string(r_same) + ", share " + fmt("%.15f", share) +
              "; VAR(1) max |Phi - 0.7I| " + fmt("%.4f", var_dev) + " (tol 0.1, T=500); r=N reconstruction " +
              fmt("%.3g", rec) + " (tol 1e-8)"};
}

// Forecaster whose forecasts come from the gateway; records each request's history.
struct PayloadLog {
  std::mutex mu;
  std::map<std::string, std::string> hash;  // request_id -> history hash
  bool beyond_origin = false;
};

std::shared_ptr<Gateway> logging_gateway(std::shared_ptr<PayloadLog> log) {
  auto adapter = std::make_unique<FunctionAdapter>(
      ModelInfo{"payload-probe", "1"},
      [log](const std::string& line) {
        const auto req = parse_request(line);
        const auto& hist = req.history;
        // request_id is series@origin+h; the origin is the last history period.
        const auto at = req.request_id.find('@'), plus = req.request_id.find('+');
        const auto origin = Period::parse(req.request_id.substr(at + 1, plus - at - 1));
        {
          std::lock_guard lk(log->mu);
          log->hash[req.request_id] = history_hash(hist);
          if (hist.back().period != origin) log->beyond_origin = true;
        }
        ForecastResponse resp{req.request_id, std::vector<double>(static_cast<std::size_t>(req.horizon),
                                                                  hist.back().value),
                              std::nullopt, ModelInfo{"payload-probe", "1"}};
        return to_wire(resp);
      },
      4);
  return std::make_shared<Gateway>(std::move(adapter));
}

Outcome leakage(std::uint64_t seed) {
  const auto base = synthetic_panel(seed, Period{2000, 1}, 40);
  const std::vector<std::string> models = {"persistence", "arima", "lsboost", "factor", "gateway"};

  auto run_all = [&](const std::vector<TimeSeries>& data, std::shared_ptr<PayloadLog> log, std::optional<Period> last) {
    auto reg = builtin_registry();
    reg.add(make_gateway_forecaster("gateway", logging_gateway(log)));
    BacktestPlan plan;
    plan.model_ids = models;
    plan.last_origin = last;
    plan.slices = {{"all", base.front().span()}};
    plan.jobs = 2;
    return run_backtest(plan, data, reg);
  };

  auto base_log = std::make_shared<PayloadLog>();
  const auto reference = run_all(base, base_log, std::nullopt);
  std::map<std::string, const ForecastRecord*> ref_rec;
  for (const auto& run : reference)
    for (const auto& r : run.records) {
      if (!r.ok) return {false, run.model_id + " failed at " + r.origin.to_string() + ": " + r.detail};
      ref_rec[run.series_id + "|" + run.model_id + "|" + r.origin.to_string()] = &r;
    }

  std::size_t compared = 0, perturbations = 0;
  for (std::size_t s = 0; s < base.size(); ++s) {
    for (Eigen::Index j = kMinTrainingObservations; j < base[s].size(); ++j) {
      Eigen::VectorXd v = base[s].values();
      v[j] += 1000.0;
      auto data = base;
      data[s] = base[s].with_values(v);
      // The claim covers origins before the perturbed period; the plan needs at least two origins.
      const Period last = base[s].period(std::max<Eigen::Index>(j - 1, kMinTrainingObservations));
      auto log = std::make_shared<PayloadLog>();
      const auto runs = run_all(data, log, last);
      ++perturbations;
      for (const auto& run : runs) {
        for (const auto& r : run.records) {
          if (!(r.origin < base[s].period(j))) continue;
          const auto key = run.series_id + "|" + run.model_id + "|" + r.origin.to_string();
          const auto* want = ref_rec.at(key);
          if (!r.ok || !same_bits(r.forecast, want->forecast))
            return {false, run.model_id + " on " + run.series_id + " at origin " + r.origin.to_string() +
                               " changed when " + base[s].id() + " " + base[s].period(j).to_string() +
                               " was perturbed"};
          ++compared;
        }
      }
      for (const auto& [id, h] : log->hash)
        if (Period::parse(id.substr(id.find('@') + 1, 6)) < base[s].period(j) && base_log->hash.at(id) != h)
          return {false, "gateway payload " + id + " changed under perturbation"};
      if (log->beyond_origin) return {false, "gateway payload extends beyond its origin"};
    }
  }
  if (base_log->beyond_origin) return {false, "gateway payload extends beyond its origin"};
  return {true, std::to_string(perturbations) + " single-value perturbations (+1000) of a 4x40 panel; " +
                    std::to_string(compared) + " forecasts bit-identical across 5 models incl. gateway payloads"};
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(std::uint64_t seed, const fs::path& scratch) {
  fs::create_directories(scratch);
  const auto data_path = scratch / "panel.csv";
  {
    std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
    out << to_csv(synthetic_panel(seed, Period{2008, 1}, 56));
  }
  std::ostringstream sink;
  auto run = [&](const std::string& out_dir, const std::string& jobs) {
    return run_cli({"backtest", "--data", data_path.string(), "--models", "persistence,arima,lsboost,factor",
                    "--slices", "full=2008Q1-2021Q4", "--slices", "late=2016Q1-2021Q4", "--seed",
                    std::to_string(seed), "--jobs", jobs, "--out", (scratch / out_dir).string()},
                   sink, sink);
  };
  const int rc1 = run("run1", "1"), rc2 = run("run2", "3");
  if (rc1 != 0 || rc2 != 0)
    return {false, "CLI backtest exited with " + std::to_string(rc1) + "/" + std::to_string(rc2) + ": " + sink.str()};
  const auto a = read_all(scratch / "run1" / "report.json"), b = read_all(scratch / "run2" / "report.json");
  const bool reports_equal = !a.empty() && a == b;

  const auto runs = runs_from_json(read_all(scratch / "run1" / "runs.json"));
  const auto r1 = robustness_regression(runs.front(), 200, 10, seed);
  const auto r2 = robustness_regression(runs.front(), 200, 10, seed);
  const bool slope_equal = same_bits(r1.slope, r2.slope) && same_bits(r1.intercept, r2.intercept);

  BacktestRun perfect = runs.front();
  for (auto& r : perfect.records) r.forecast = r.actual;
  const double perfect_slope = robustness_regression(perfect, 200, 10, seed).slope;

  return {reports_equal && slope_equal && perfect_slope == 0.0,
          std::string("report.json ") + (reports_equal ? "byte-identical" : "DIFFERS") + " across two CLI runs (" +
              std::to_string(a.size()) + " bytes, jobs 1 vs 3); robustness slope " +
              (slope_equal ? "reproduced bit-exactly" : "NOT reproduced") + "; perfect-forecaster slope " +
              fmt("%g", perfect_slope)};
}

Outcome table_shape(std::uint64_t seed) {
  const auto s = default_slices();
  const std::vector<std::pair<std::string, std::string>> want = {{"26-year Past-to-Present", "1999Q3-2024Q3"},
                                                                 {"3-year Pre-COVID-19", "2017Q1-2019Q4"},
                                                                 {"3-year During-COVID-19", "2020Q1-2022Q4"},
                                                                 {"2-year Post-COVID-19", "2023Q1-2024Q3"}};
  bool slices_ok = s.size() == want.size();
  for (std::size_t i = 0; slices_ok && i < s.size(); ++i)
    slices_ok = s[i].name == want[i].first && s[i].window.to_string() == want[i].second;

  // Mean rank against ranks recomputed by sorting RMSEs.
  std::mt19937_64 rng(seed);
  const auto data = synthetic_panel(seed, Period{1995, 3}, 117);
  std::vector<BacktestRun> runs;
  const std::vector<double> noise = {0.2, 0.5, 0.9, 1.4};
  for (std::size_t si = 0; si < data.size(); ++si) {
    const auto& series = data[si];
    for (std::size_t k = 0; k < noise.size(); ++k) {
      BacktestRun run;
      run.series_id = series.id();
      run.model_id = "m" + std::to_string(k);
      std::normal_distribution<double> nd(0.0, noise[(k + si) % noise.size()]);
      for (Eigen::Index t = 16; t < series.size(); ++t)
        run.records.push_back({series.period(t - 1), series.period(t), series[t] + nd(rng), series[t], true, {}, {}});
      runs.push_back(std::move(run));
    }
  }
  const auto rep = evaluate_slices(runs, data, s);
  double worst = 0.0;
  for (const auto& ev : rep.slices) {
    std::map<std::string, double> total;
    for (const auto& series : data) {
      std::vector<std::pair<double, std::string>> col;
      for (const auto& run : runs) {
        if (run.series_id != series.id()) continue;
        double sse = 0.0;
        int n = 0;
        for (const auto& r : run.records)
          if (ev.slice.window.contains(r.target)) {
            sse += (r.actual - r.forecast) * (r.actual - r.forecast);
            ++n;
          }
        col.emplace_back(std::sqrt(sse / n), run.model_id);
      }
      std::sort(col.begin(), col.end());
      for (std::size_t k = 0; k < col.size(); ++k) total[col[k].second] += static_cast<double>(k + 1);
    }
    for (const auto& [mid, t] : total) worst = std::max(worst, std::abs(ev.mean_rank.at(mid) - t / data.size()));
  }

  Report flags;
  flags.dm_references = {"ref"};
  flags.dm = {DmCell{"GDP", "full", "a", "ref", 2.0, 0.049, 30, {}}, DmCell{"GDP", "full", "b", "ref", 1.9, 0.051, 30, {}}};
  const auto csv = dm_grid_csv(flags);
  const bool bold_ok = format_p_value(0.049) == "**0.0490**" && format_p_value(0.051) == "0.0510" &&
                       format_p_value(0.05) == "0.0500" && csv.find("GDP,full,a,0.049,1\n") != std::string::npos &&
                       csv.find("GDP,full,b,0.051,0\n") != std::string::npos;

  return {slices_ok && worst < 1e-12 && bold_ok,
          std::string("default slices ") + (slices_ok ? "match" : "DIFFER") + "; mean rank vs sorted-RMSE oracle max dev " +
              fmt("%.3g", worst) + "; bold at p=0.049 " + (bold_ok ? "yes, at 0.051 and 0.05 no" : "WRONG")};
}

CriterionResult reference_data_check(const std::optional<std::string>& path) {
  CriterionResult res{"data-conditional: persistence on published GDP", CriterionStatus::skip, {}, 0.0};
  if (!path) {
    res.detail = "no reference CSV supplied";
    return res;
  }
  try {
    const auto data = ingest_csv_file(*path);
    const TimeSeries* gdp = nullptr;
    for (const auto& s : data) {
      std::string up = s.id();
      for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      if (up.find("GDP") != std::string::npos) {
        gdp = &s;
        break;
      }
    }
    if (!gdp) gdp = &data.front();
    BacktestPlan plan;
    plan.series_ids = {gdp->id()};
    plan.model_ids = {"persistence"};
    plan.slices = {default_slices().front()};
    const auto reg = builtin_registry();
    validate_plan(plan, data, reg);
    const auto runs = run_backtest(plan, data, reg);
    const auto ev = evaluate_slices(runs, data, plan.slices);
    const auto& c = ev.slices[0].cells.at(gdp->id()).at("persistence");
    const bool within = std::abs(c.mae - 1.44) <= 0.05 && std::abs(c.rmse - 3.08) <= 0.05;
    res.status = CriterionStatus::report;
    res.detail = gdp->id() + " " + ev.slices[0].slice.window.to_string() + ": MAE " + fmt("%.4f", c.mae) +
                 " (published 1.44), RMSE " + fmt("%.4f", c.rmse) + " (published 3.08); " +
                 (within ? "within" : "OUTSIDE") + " +/-0.05";
  } catch (const std::exception& e) {
    res.status = CriterionStatus::report;
    res.detail = std::string("could not evaluate: ") + e.what();
  }
  return res;
}

}  // namespace

std::vector<CriterionResult> run_selftest(const SelftestOptions& opt,
                                          const std::function<void(const CriterionResult&)>& on_result) {
  fs::path scratch = opt.scratch_dir;
  bool own_scratch = false;
  if (scratch.empty()) {
    scratch = fs::temp_directory_path() / ("macrocast-selftest-" + std::to_string(opt.seed) + "-" +
                                           std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    own_scratch = true;
  }

  std::vector<CriterionResult> out;
  auto timed = [&](std::string name, double limit_s, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r{std::move(name), CriterionStatus::fail, {}, 0.0};
    try {
      const auto o = fn();
      r.status = o.status();
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && r.seconds > limit_s) {
      r.status = CriterionStatus::fail;
      r.detail += "; exceeded the " + fmt("%g", limit_s) + " s budget";
    }
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };

  const auto seed = opt.seed;
  timed("metric oracles", 5.0, [&] { return metric_oracles(seed); });
  timed("DM correctness", 60.0, [&] { return dm_correctness(seed + 1); });
  timed("ARIMA recovery", 180.0, [&] { return arima_recovery(seed + 2); });
  timed("LSBoost", 0.0, [&] { return lsboost_checks(seed + 3); });
  timed("factor model", 0.0, [&] { return factor_checks(seed + 4); });
  timed("leakage", 0.0, [&] { return leakage(seed + 5); });
  timed("determinism", 0.0, [&] { return determinism(seed + 6, scratch); });
  timed("table shape", 0.0, [&] { return table_shape(seed + 7); });

  const auto t0 = std::chrono::steady_clock::now();
  auto ref = reference_data_check(opt.reference_csv);
  ref.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (ref.status == CriterionStatus::report && ref.seconds > 10.0) ref.detail += "; exceeded the 10 s budget";
  if (on_result) on_result(ref);
  out.push_back(std::move(ref));

  if (own_scratch) {
    std::error_code ec;
    fs::remove_all(scratch, ec);
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  const char* tag = r.status == CriterionStatus::pass   ? "PASS  "
                    : r.status == CriterionStatus::fail ? "FAIL  "
                    : r.status == CriterionStatus::skip ? "SKIP  "
                                                        : "REPORT";
  return std::string(tag) + " " + r.name + " (" + fmt("%.2f", r.seconds) + " s): " + r.detail;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  for (const auto& r : results)
    if (r.status == CriterionStatus::fail) return false;
  return true;
}

}  // namespace macrocast
