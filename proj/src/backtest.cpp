#include "macrocast/backtest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "macrocast/errors.hpp"

namespace macrocast {

std::vector<NamedWindow> default_slices() {
  return {
      {"26-year Past-to-Present", Window(Period{1999, 3}, Period{2024, 3})},
      {"3-year Pre-COVID-19", Window(Period{2017, 1}, Period{2019, 4})},
      {"3-year During-COVID-19", Window(Period{2020, 1}, Period{2022, 4})},
      {"2-year Post-COVID-19", Window(Period{2023, 1}, Period{2024, 3})},
  };
}

NamedWindow parse_named_window(std::string_view token) {
  const auto eq = token.find('=');
  if (eq == std::string_view::npos) {
    const auto w = Window::parse(token);
    return {w.to_string(), w};
  }
  const auto name = std::string(token.substr(0, eq));
  if (name.empty()) throw InvalidArgument("slice name is empty in '" + std::string(token) + "'");
  return {name, Window::parse(token.substr(eq + 1))};
}

std::size_t BacktestRun::failures() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
}

bool BacktestRun::over_budget(double budget) const {
  if (records.empty()) return false;
  return static_cast<double>(failures()) > budget * static_cast<double>(records.size());
}

namespace {

const TimeSeries* find_series(const std::vector<TimeSeries>& data, const std::string& id) {
  for (const auto& s : data)
    if (s.id() == id) return &s;
  return nullptr;
}

std::vector<const TimeSeries*> selected_series(const BacktestPlan& plan, const std::vector<TimeSeries>& data) {
  std::vector<const TimeSeries*> out;
  if (plan.series_ids.empty()) {
    for (const auto& s : data) out.push_back(&s);
    return out;
  }
  for (const auto& id : plan.series_ids) {
    const auto* s = find_series(data, id);
    if (!s) throw InvalidArgument("plan names unknown series '" + id + "'");
    out.push_back(s);
  }
  return out;
}

struct OriginRange {
  Period first, last;
};

OriginRange origin_range(const BacktestPlan& plan, const TimeSeries& s) {
  const Period earliest = s.start().shifted(kMinTrainingObservations - 1);
  const Period latest = s.end().shifted(-plan.horizon);
  OriginRange r{plan.first_origin.value_or(earliest), plan.last_origin.value_or(latest)};
  if (r.first < earliest)
    throw InvalidArgument("first origin " + r.first.to_string() + " leaves fewer than " +
                          std::to_string(kMinTrainingObservations) + " training observations for '" + s.id() +
                          "' (earliest " + earliest.to_string() + ")");
  if (r.last > latest)
    throw InvalidArgument("last origin " + r.last.to_string() + " has no observed target for '" + s.id() +
                          "' at horizon " + std::to_string(plan.horizon) + " (latest " + latest.to_string() + ")");
  if (!(r.first < r.last))
    throw InvalidArgument("first origin " + r.first.to_string() + " must precede last origin " + r.last.to_string() +
                          " for '" + s.id() + "'");
  return r;
}

}  // namespace

void validate_plan(const BacktestPlan& plan, const std::vector<TimeSeries>& data, const ForecasterRegistry& registry) {
  if (data.empty()) throw InvalidArgument("no series to backtest");
  if (plan.horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (plan.refit_stride < 1) throw InvalidArgument("refit stride must be >= 1");
  if (plan.jobs < 1) throw InvalidArgument("jobs must be >= 1");
  if (!(plan.failure_budget >= 0.0 && plan.failure_budget <= 1.0))
    throw InvalidArgument("failure budget must lie in [0, 1]");
  if (plan.model_ids.empty()) throw InvalidArgument("plan names no models");
  std::set<std::string> seen;
  for (const auto& m : plan.model_ids) {
    if (!seen.insert(m).second) throw InvalidArgument("model '" + m + "' listed twice");
    registry.get(m);
  }
  seen.clear();
  for (const auto& id : plan.series_ids)
    if (!seen.insert(id).second) throw InvalidArgument("series '" + id + "' listed twice");
  const auto series = selected_series(plan, data);
  Period lo = series.front()->start(), hi = series.front()->end();
  for (const auto* s : series) {
    origin_range(plan, *s);
    lo = std::min(lo, s->start());
    hi = std::max(hi, s->end());
  }
  seen.clear();
  for (const auto& sl : plan.slices) {
    if (!seen.insert(sl.name).second) throw InvalidArgument("slice '" + sl.name + "' listed twice");
    if (sl.window.end < lo || hi < sl.window.start)
      throw InvalidArgument("slice '" + sl.name + "' (" + sl.window.to_string() + ") lies outside the data span " +
                            Window(lo, hi).to_string());
  }
}

namespace {

BacktestRun run_one(const BacktestPlan& plan, const std::vector<TimeSeries>& data, const TimeSeries& series,
                    const Forecaster& model) {
  BacktestRun run;
  run.model_id = model.id();
  run.series_id = series.id();
  run.horizon = plan.horizon;
  run.not_applicable = model.not_applicable(data);
  if (!run.not_applicable.empty()) return run;

  std::size_t target_index = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (&data[i] == &series) target_index = i;

  const auto range = origin_range(plan, series);
  auto session = model.session(plan.refit_stride);
  for (Period origin = range.first; origin <= range.last; origin = origin.successor()) {
    ForecastRecord rec;
    rec.origin = origin;
    rec.target = origin.shifted(plan.horizon);
    rec.actual = series[*series.index_of(rec.target)];
    const TimeSeries history = series.truncated(origin);
    std::vector<TimeSeries> panel;
    std::size_t panel_index = 0;
    if (model.needs_panel()) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].start() > origin) continue;
        if (i == target_index) panel_index = panel.size();
        panel.push_back(data[i].truncated(origin));
      }
    }
    try {
      const ForecastInput in{history, model.needs_panel() ? &panel : nullptr, panel_index, origin, plan.horizon};
      const Eigen::VectorXd f = session->forecast(in);
      if (f.size() != plan.horizon) throw ForecastFailure("invalid_output", "forecast length differs from horizon");
      if (!std::isfinite(f[plan.horizon - 1])) throw ForecastFailure("invalid_output", "non-finite forecast");
      rec.forecast = f[plan.horizon - 1];
    } catch (const ForecastFailure& e) {
      rec.ok = false;
      rec.failure = e.reason();
      rec.detail = e.what();
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.failure = "model_error";
      rec.detail = e.what();
    }
    run.records.push_back(std::move(rec));
  }
  return run;
}

}  // namespace

std::vector<BacktestRun> run_backtest(const BacktestPlan& plan, const std::vector<TimeSeries>& data,
                                      const ForecasterRegistry& registry) {
  validate_plan(plan, data, registry);
  const auto series = selected_series(plan, data);
  struct Task {
    const TimeSeries* series;
    const Forecaster* model;
  };
  std::vector<Task> tasks;
  for (const auto* s : series)
    for (const auto& m : plan.model_ids) tasks.push_back({s, &registry.get(m)});

  std::vector<BacktestRun> runs(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();)
      runs[i] = run_one(plan, data, *tasks[i].series, *tasks[i].model);
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(plan.jobs), tasks.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return runs;
}

namespace {

template <class T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

MetricCell evaluate_cell(const BacktestRun& run, const TimeSeries* series, const Window& w,
                         const EvaluationOptions& opt) {
  MetricCell c;
  if (!run.not_applicable.empty()) {
    c.note = "not applicable: " + run.not_applicable;
    return c;
  }
  std::vector<const ForecastRecord*> ok;
  for (const auto& r : run.records) {
    if (!w.contains(r.target)) continue;
    ++c.n_expected;
    if (r.ok)
      ok.push_back(&r);
    else
      ++c.n_failed;
  }
  c.n_records = ok.size();
  if (c.n_expected == 0) {
    c.note = "no records in slice";
    return c;
  }
  if (static_cast<double>(c.n_failed) > opt.max_missing_share * static_cast<double>(c.n_expected)) {
    c.note = "missing " + std::to_string(c.n_failed) + " of " + std::to_string(c.n_expected) + " records";
    return c;
  }
  const auto n = static_cast<Eigen::Index>(ok.size());
  Eigen::VectorXd a(n), f(n);
  std::vector<Period> periods;
  for (Eigen::Index i = 0; i < n; ++i) {
    a[i] = ok[static_cast<std::size_t>(i)]->actual;
    f[i] = ok[static_cast<std::size_t>(i)]->forecast;
    periods.push_back(ok[static_cast<std::size_t>(i)]->target);
  }
  const ErrorSample e(a, f, periods);
  c.available = true;
  c.mae = mae(e);
  c.mse = mse(e);
  c.rmse = rmse(e);
  c.smape = smape(e);
  if (!series) {
    c.note = "MASE unavailable: series not in data";
    return c;
  }
  try {
    if (opt.mase_per_origin) {
      double s = 0.0;
      for (const auto* r : ok)
        s += std::abs(r->actual - r->forecast) / mase_denominator(series->truncated(r->origin).values(), opt.mase_m);
      c.mase = s / static_cast<double>(n);
    } else {
      c.mase = mase(e, series->truncated(ok.back()->origin), opt.mase_m);
    }
  } catch (const std::exception& ex) {
    c.note = std::string("MASE unavailable: ") + ex.what();
  }
  return c;
}

}  // namespace

MetricReport evaluate_slices(const std::vector<BacktestRun>& runs, const std::vector<TimeSeries>& data,
                             const std::vector<NamedWindow>& slices, const EvaluationOptions& options) {
  MetricReport rep;
  rep.options = options;
  for (const auto& r : runs) {
    push_unique(rep.series_ids, r.series_id);
    push_unique(rep.model_ids, r.model_id);
  }
  for (const auto& sl : slices) {
    SliceEvaluation ev;
    ev.slice = sl;
    for (const auto& r : runs) ev.cells[r.series_id][r.model_id] = evaluate_cell(r, find_series(data, r.series_id), sl.window, options);
    std::vector<Scores> rank_cols;
    for (const auto& [sid, row] : ev.cells) {
      std::map<MetricKind, Scores> cols;
      for (const auto& [mid, c] : row) {
        if (!c.available) continue;
        cols[MetricKind::mae][mid] = c.mae;
        cols[MetricKind::rmse][mid] = c.rmse;
        cols[MetricKind::smape][mid] = c.smape;
        cols[MetricKind::mase][mid] = c.mase;
      }
      ev.rmse_ranks[sid] = rank_models(cols[MetricKind::rmse]);
      for (auto& [kind, col] : cols) ev.tiers[sid][kind] = tier_labels(col);
      if (!ev.rmse_ranks[sid].empty()) rank_cols.push_back(ev.rmse_ranks[sid]);
    }
    ev.mean_rank = mean_ranks(rank_cols);
    rep.slices.push_back(std::move(ev));
  }
  return rep;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw InvalidArgument("uniform_index: empty range");
  const std::uint64_t range = hi - lo + 1;  // wraps to 0 for the full 64-bit range
  if (range == 0) return rng();
  const std::uint64_t threshold = (0 - range) % range;  // 2^64 mod range
  for (;;) {
    const std::uint64_t v = rng();
    if (v >= threshold) return lo + v % range;
  }
}

RobustnessResult robustness_regression(const BacktestRun& run, int n_windows, int min_len, std::uint64_t seed) {
  if (n_windows < 2) throw InvalidArgument("robustness regression needs at least two windows");
  if (min_len < 2) throw InvalidArgument("robustness windows need at least two quarters");
  std::vector<const ForecastRecord*> ok;
  for (const auto& r : run.records)
    if (r.ok) ok.push_back(&r);
  const auto N = ok.size();
  if (N < static_cast<std::size_t>(min_len))
    throw InvalidArgument("run has " + std::to_string(N) + " usable records, fewer than the minimum window " +
                          std::to_string(min_len));
  std::mt19937_64 rng(seed);
  RobustnessResult res;
  for (int k = 0; k < n_windows; ++k) {
    const auto start = uniform_index(rng, 0, N - static_cast<std::size_t>(min_len));
    const auto len = uniform_index(rng, static_cast<std::uint64_t>(min_len), N - start);
    double mean = 0.0, sse = 0.0;
    for (auto i = start; i < start + len; ++i) mean += ok[i]->actual;
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (auto i = start; i < start + len; ++i) {
      var += (ok[i]->actual - mean) * (ok[i]->actual - mean);
      const double e = ok[i]->actual - ok[i]->forecast;
      sse += e * e;
    }
    res.points.push_back({Window(ok[start]->target, ok[start + len - 1]->target), var / static_cast<double>(len - 1),
                          std::sqrt(sse / static_cast<double>(len))});
  }
  double xm = 0.0, ym = 0.0;
  for (const auto& p : res.points) {
    xm += p.actual_variance;
    ym += p.model_rmse;
  }
  xm /= n_windows;
  ym /= n_windows;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : res.points) {
    sxx += (p.actual_variance - xm) * (p.actual_variance - xm);
    sxy += (p.actual_variance - xm) * (p.model_rmse - ym);
  }
  if (!(sxx > 0.0)) throw DegenerateError("every sampled window has the same actual variance; slope undefined");
  res.slope = sxy / sxx;
  res.intercept = ym - res.slope * xm;
  return res;
}

std::vector<DmCell> dm_grid(const std::vector<BacktestRun>& runs, const std::vector<NamedWindow>& slices,
                            const std::vector<std::string>& references, Loss loss, const DmOptions& options) {
  std::vector<std::string> series_ids, model_ids;
  for (const auto& r : runs) {
    push_unique(series_ids, r.series_id);
    push_unique(model_ids, r.model_id);
  }
  auto find_run = [&](const std::string& sid, const std::string& mid) -> const BacktestRun* {
    for (const auto& r : runs)
      if (r.series_id == sid && r.model_id == mid) return &r;
    return nullptr;
  };
  std::vector<DmCell> out;
  for (const auto& sid : series_ids) {
    for (const auto& sl : slices) {
      for (const auto& cand : model_ids) {
        for (const auto& ref : references) {
          DmCell cell{sid, sl.name, cand, ref, std::nullopt, std::nullopt, 0, {}};
          const auto* a = find_run(sid, cand);
          const auto* b = find_run(sid, ref);
          if (!a || !b) {
            cell.note = "model not run: " + std::string(!a ? cand : ref);
          } else if (!a->not_applicable.empty() || !b->not_applicable.empty()) {
            cell.note = "not applicable";
          } else if (a->horizon != b->horizon) {
            cell.note = "horizon mismatch";
          } else {
            std::map<std::int64_t, const ForecastRecord*> by_origin;
            for (const auto& r : b->records)
              if (r.ok && sl.window.contains(r.target)) by_origin[r.origin.ordinal()] = &r;
            std::vector<double> ya, fa, fb;
            std::vector<Period> periods;
            for (const auto& r : a->records) {
              if (!r.ok || !sl.window.contains(r.target)) continue;
              auto it = by_origin.find(r.origin.ordinal());
              if (it == by_origin.end()) continue;
              ya.push_back(r.actual);
              fa.push_back(r.forecast);
              fb.push_back(it->second->forecast);
              periods.push_back(r.target);
            }
            cell.n = ya.size();
            const auto min_n = static_cast<std::size_t>(std::max(8, 2 * a->horizon));
            if (cell.n < min_n) {
              cell.note = "insufficient overlapping origins (" + std::to_string(cell.n) + ")";
            } else {
              const auto n = static_cast<Eigen::Index>(cell.n);
              const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ya.data(), n);
              const ErrorSample ea(y, Eigen::Map<const Eigen::VectorXd>(fa.data(), n), periods);
              const ErrorSample eb(y, Eigen::Map<const Eigen::VectorXd>(fb.data(), n), periods);
              try {
                const auto res = dm_statistic(loss_differential(ea, eb, loss, a->horizon), options);
                cell.statistic = res.statistic;
                cell.p_value = res.p_value;
                cell.note = res.warning;
              } catch (const DegenerateError& e) {
                cell.note = std::string("degenerate: ") + e.what();
              }
            }
          }
          out.push_back(std::move(cell));
        }
      }
    }
  }
  return out;
}

}  // namespace macrocast
