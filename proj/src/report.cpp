#include "macrocast/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "macrocast/csv.hpp"
#include "macrocast/errors.hpp"

namespace macrocast {

using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kRunsFormat = "macrocast.runs";
constexpr const char* kReportFormat = "macrocast.report";
constexpr int kFormatVersion = 1;
constexpr MetricKind kTableMetrics[] = {MetricKind::mae, MetricKind::rmse, MetricKind::smape, MetricKind::mase};

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

double number_or_nan(const ojson& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string fixed(double v, int decimals) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string runs_key(const std::string& series, const std::string& model) { return series + '\n' + model; }

}  // namespace

std::string runs_to_json(const std::vector<BacktestRun>& runs) {
  ojson arr = ojson::array();
  for (const auto& run : runs) {
    ojson recs = ojson::array();
    for (const auto& r : run.records) {
      ojson jr;
      jr["origin"] = r.origin.to_string();
      jr["target"] = r.target.to_string();
      jr["forecast"] = number_or_null(r.forecast);
      jr["actual"] = number_or_null(r.actual);
      jr["ok"] = r.ok;
      if (!r.ok) {
        jr["failure"] = r.failure;
        jr["detail"] = r.detail;
      }
      recs.push_back(std::move(jr));
    }
    ojson j;
    j["series"] = run.series_id;
    j["model"] = run.model_id;
    j["horizon"] = run.horizon;
    j["not_applicable"] = run.not_applicable;
    j["records"] = std::move(recs);
    arr.push_back(std::move(j));
  }
  ojson doc;
  doc["format"] = kRunsFormat;
  doc["version"] = kFormatVersion;
  doc["runs"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::vector<BacktestRun> runs_from_json(std::string_view text) {
  try {
    const auto doc = ojson::parse(text);
    if (doc.at("format") != kRunsFormat || doc.at("version") != kFormatVersion)
      throw DataError("not a macrocast runs file (format/version mismatch)");
    std::vector<BacktestRun> out;
    for (const auto& j : doc.at("runs")) {
      BacktestRun run;
      run.series_id = j.at("series").get<std::string>();
      run.model_id = j.at("model").get<std::string>();
      run.horizon = j.at("horizon").get<int>();
      run.not_applicable = j.at("not_applicable").get<std::string>();
      for (const auto& jr : j.at("records")) {
        ForecastRecord r;
        r.origin = Period::parse(jr.at("origin").get<std::string>());
        r.target = Period::parse(jr.at("target").get<std::string>());
        r.forecast = number_or_nan(jr.at("forecast"));
        r.actual = number_or_nan(jr.at("actual"));
        r.ok = jr.at("ok").get<bool>();
        if (!r.ok) {
          r.failure = jr.at("failure").get<std::string>();
          r.detail = jr.at("detail").get<std::string>();
        }
        run.records.push_back(std::move(r));
      }
      out.push_back(std::move(run));
    }
    return out;
  } catch (const ojson::exception& e) {
    throw DataError(std::string("malformed runs file: ") + e.what());
  }
}

std::vector<RobustnessFit> robustness_fits(const std::vector<BacktestRun>& runs, const RobustnessOptions& options) {
  std::vector<RobustnessFit> out;
  for (const auto& run : runs) {
    if (!run.not_applicable.empty()) continue;
    RobustnessFit fit{run.series_id, run.model_id, std::nullopt, {}};
    try {
      fit.result = robustness_regression(run, options.n_windows, options.min_len, options.seed);
    } catch (const InvalidArgument& e) {
      fit.note = e.what();
    } catch (const DegenerateError& e) {
      fit.note = e.what();
    }
    out.push_back(std::move(fit));
  }
  return out;
}

std::vector<RunSummary> summarize_runs(const std::vector<BacktestRun>& runs, double failure_budget) {
  std::vector<RunSummary> out;
  for (const auto& run : runs)
    out.push_back({run.series_id, run.model_id, run.records.size(), run.failures(),
                   run.not_applicable.empty() && run.over_budget(failure_budget), run.not_applicable});
  return out;
}

std::string report_json(const Report& rep) {
  ojson doc;
  doc["format"] = kReportFormat;
  doc["version"] = kFormatVersion;
  try {
    doc["config"] = rep.config_json.empty() ? ojson::object() : ojson::parse(rep.config_json);
  } catch (const ojson::exception& e) {
    throw InvalidArgument(std::string("report config is not JSON: ") + e.what());
  }
  const auto& m = rep.metrics;
  doc["mase"] = {{"m", m.options.mase_m},
                 {"denominator", m.options.mase_per_origin ? "per origin" : "pooled, training window to last origin"}};
  doc["max_missing_share"] = m.options.max_missing_share;
  doc["series"] = m.series_ids;
  doc["models"] = m.model_ids;

  ojson slices = ojson::array();
  for (const auto& ev : m.slices) {
    ojson cells = ojson::array();
    for (const auto& sid : m.series_ids) {
      auto row = ev.cells.find(sid);
      if (row == ev.cells.end()) continue;
      for (const auto& mid : m.model_ids) {
        auto it = row->second.find(mid);
        if (it == row->second.end()) continue;
        const auto& c = it->second;
        ojson jc;
        jc["series"] = sid;
        jc["model"] = mid;
        jc["available"] = c.available;
        jc["n_expected"] = c.n_expected;
        jc["n_records"] = c.n_records;
        jc["n_failed"] = c.n_failed;
        jc["mae"] = number_or_null(c.mae);
        jc["mse"] = number_or_null(c.mse);
        jc["rmse"] = number_or_null(c.rmse);
        jc["smape"] = number_or_null(c.smape);
        jc["mase"] = number_or_null(c.mase);
        const auto& ranks = ev.rmse_ranks.at(sid);
        auto rk = ranks.find(mid);
        jc["rmse_rank"] = rk == ranks.end() ? ojson(nullptr) : ojson(rk->second);
        ojson tiers = ojson::object();
        if (auto ts = ev.tiers.find(sid); ts != ev.tiers.end()) {
          for (auto kind : kTableMetrics) {
            auto col = ts->second.find(kind);
            if (col == ts->second.end()) continue;
            if (auto t = col->second.find(mid); t != col->second.end())
              tiers[std::string(to_string(kind))] = std::string(to_string(t->second));
          }
        }
        jc["tiers"] = std::move(tiers);
        jc["note"] = c.note;
        cells.push_back(std::move(jc));
      }
    }
    ojson mean_rank = ojson::object();
    for (const auto& mid : m.model_ids)
      if (auto it = ev.mean_rank.find(mid); it != ev.mean_rank.end()) mean_rank[mid] = it->second;
    slices.push_back({{"name", ev.slice.name},
                      {"window", ev.slice.window.to_string()},
                      {"cells", std::move(cells)},
                      {"mean_rank", std::move(mean_rank)}});
  }
  doc["slices"] = std::move(slices);

  ojson dm_cells = ojson::array();
  for (const auto& c : rep.dm) {
    dm_cells.push_back({{"series", c.series_id},
                        {"slice", c.slice},
                        {"model", c.candidate},
                        {"reference", c.reference},
                        {"n", c.n},
                        {"statistic", c.statistic ? ojson(*c.statistic) : ojson(nullptr)},
                        {"p_value", c.p_value ? ojson(*c.p_value) : ojson(nullptr)},
                        {"significant", c.p_value.has_value() && significant(*c.p_value)},
                        {"note", c.note}});
  }
  doc["dm"] = {{"loss", std::string(to_string(rep.dm_loss))},
               {"alpha", kSignificanceLevel},
               {"references", rep.dm_references},
               {"cells", std::move(dm_cells)}};

  ojson fits = ojson::array();
  for (const auto& f : rep.robustness) {
    ojson jf = {{"series", f.series_id}, {"model", f.model_id}};
    jf["slope"] = f.result ? ojson(f.result->slope) : ojson(nullptr);
    jf["intercept"] = f.result ? ojson(f.result->intercept) : ojson(nullptr);
    jf["note"] = f.note;
    fits.push_back(std::move(jf));
  }
  doc["robustness"] = {{"n_windows", rep.robustness_options.n_windows},
                       {"min_len", rep.robustness_options.min_len},
                       {"seed", rep.robustness_options.seed},
                       {"fits", std::move(fits)}};

  ojson runs = ojson::array();
  for (const auto& s : rep.runs)
    runs.push_back({{"series", s.series_id},
                    {"model", s.model_id},
                    {"records", s.records},
                    {"failed", s.failed},
                    {"over_budget", s.over_budget},
                    {"not_applicable", s.not_applicable}});
  doc["runs"] = std::move(runs);
  return doc.dump(2) + "\n";
}

std::string report_csv(const Report& rep) {
  std::ostringstream os;
  os << "slice,window,series,model,available,n_expected,n_records,n_failed,mae,mse,rmse,smape,mase,rmse_rank,note\n";
  const auto& m = rep.metrics;
  for (const auto& ev : m.slices) {
    for (const auto& sid : m.series_ids) {
      auto row = ev.cells.find(sid);
      if (row == ev.cells.end()) continue;
      for (const auto& mid : m.model_ids) {
        auto it = row->second.find(mid);
        if (it == row->second.end()) continue;
        const auto& c = it->second;
        const auto& ranks = ev.rmse_ranks.at(sid);
        auto rk = ranks.find(mid);
        os << csv_field(ev.slice.name) << ',' << ev.slice.window.to_string() << ',' << csv_field(sid) << ','
           << csv_field(mid) << ',' << (c.available ? 1 : 0) << ',' << c.n_expected << ',' << c.n_records << ','
           << c.n_failed << ',' << csv_number(c.mae) << ',' << csv_number(c.mse) << ',' << csv_number(c.rmse) << ','
           << csv_number(c.smape) << ',' << csv_number(c.mase) << ','
           << (rk == ranks.end() ? std::string() : format_double(rk->second)) << ',' << csv_field(c.note) << '\n';
      }
    }
  }
  return os.str();
}

std::string report_markdown(const Report& rep) {
  const auto& m = rep.metrics;
  std::ostringstream os;
  os << "# Backtest report\n\n";
  os << "- MASE denominator: lag-" << m.options.mase_m << " naive MAE, "
     << (m.options.mase_per_origin ? "per origin" : "pooled over the training window to the last origin") << "\n";
  os << "- LSBoost features: own lags 1-4 and quarter dummies (univariate analogue)\n";
  os << "- Tiers by rank within each column: good, ok, meh, bad\n";
  os << "- Cells with more than " << fixed(100.0 * m.options.max_missing_share, 0)
     << "% failed origins are n/a\n";
  os << "- Mean Rank: arithmetic mean of per-series RMSE ranks\n";

  for (const auto& ev : m.slices) {
    os << "\n## " << ev.slice.name << " (" << ev.slice.window.to_string() << ")\n\n| Model |";
    for (const auto& sid : m.series_ids)
      for (auto kind : kTableMetrics) os << ' ' << sid << ' ' << to_string(kind) << " |";
    os << " Mean Rank |\n|---|";
    for (std::size_t i = 0; i < m.series_ids.size() * std::size(kTableMetrics); ++i) os << "---:|";
    os << "---:|\n";
    for (const auto& mid : m.model_ids) {
      os << "| " << mid << " |";
      for (const auto& sid : m.series_ids) {
        const MetricCell* c = nullptr;
        if (auto row = ev.cells.find(sid); row != ev.cells.end())
          if (auto it = row->second.find(mid); it != row->second.end()) c = &it->second;
        for (auto kind : kTableMetrics) {
          if (!c || !c->available) {
            os << " n/a |";
            continue;
          }
          const double v = kind == MetricKind::mae     ? c->mae
                           : kind == MetricKind::rmse  ? c->rmse
                           : kind == MetricKind::smape ? c->smape
                                                       : c->mase;
          os << ' ' << fixed(v, 2);
          if (auto ts = ev.tiers.find(sid); ts != ev.tiers.end())
            if (auto col = ts->second.find(kind); col != ts->second.end())
              if (auto t = col->second.find(mid); t != col->second.end()) os << " (" << to_string(t->second) << ')';
          os << " |";
        }
      }
      auto mr = ev.mean_rank.find(mid);
      os << ' ' << (mr == ev.mean_rank.end() ? std::string("n/a") : fixed(mr->second, 2)) << " |\n";
    }
  }

  if (!rep.dm_references.empty()) {
    os << "\n## Diebold-Mariano p-values (" << to_string(rep.dm_loss) << " loss, bold: p < 0.05)\n";
    std::map<std::string, std::optional<double>> p;
    for (const auto& c : rep.dm) p[c.series_id + '\n' + c.slice + '\n' + c.candidate + '\n' + c.reference] = c.p_value;
    for (const auto& sid : m.series_ids) {
      os << "\n### " << sid << "\n\n| Slice | Model |";
      for (const auto& ref : rep.dm_references) os << " p vs " << ref << " |";
      os << "\n|---|---|";
      for (std::size_t i = 0; i < rep.dm_references.size(); ++i) os << "---:|";
      os << '\n';
      for (const auto& ev : m.slices) {
        for (const auto& mid : m.model_ids) {
          os << "| " << ev.slice.name << " | " << mid << " |";
          for (const auto& ref : rep.dm_references) {
            auto it = p.find(sid + '\n' + ev.slice.name + '\n' + mid + '\n' + ref);
            os << ' ' << format_p_value(it == p.end() ? std::nullopt : it->second) << " |";
          }
          os << '\n';
        }
      }
    }
  }

  std::vector<const RunSummary*> over;
  for (const auto& s : rep.runs)
    if (s.over_budget) over.push_back(&s);
  if (!over.empty()) {
    os << "\n## Failure budget exceeded\n\n";
    for (const auto* s : over)
      os << "- " << s->model_id << " on " << s->series_id << ": " << s->failed << " of " << s->records
         << " origins failed\n";
  }
  return os.str();
}

std::string format_p_value(std::optional<double> p) {
  if (!p) return "n/a";
  const auto s = fixed(*p, 4);
  return significant(*p) ? "**" + s + "**" : s;
}

std::string dm_grid_csv(const Report& rep) {
  std::ostringstream os;
  os << "series,slice,model";
  for (const auto& ref : rep.dm_references) os << ",p_" << csv_field(ref) << ",significant_" << csv_field(ref);
  os << '\n';
  std::map<std::string, const DmCell*> by_key;
  std::vector<std::string> row_order;
  for (const auto& c : rep.dm) {
    const auto row = c.series_id + '\n' + c.slice + '\n' + c.candidate;
    if (std::find(row_order.begin(), row_order.end(), row) == row_order.end()) row_order.push_back(row);
    by_key[row + '\n' + c.reference] = &c;
  }
  for (const auto& row : row_order) {
    const DmCell* first = nullptr;
    for (const auto& ref : rep.dm_references)
      if (auto it = by_key.find(row + '\n' + ref); it != by_key.end()) first = first ? first : it->second;
    if (!first) continue;
    os << csv_field(first->series_id) << ',' << csv_field(first->slice) << ',' << csv_field(first->candidate);
    for (const auto& ref : rep.dm_references) {
      auto it = by_key.find(row + '\n' + ref);
      if (it == by_key.end() || !it->second->p_value) {
        os << ",n/a,";
      } else {
        const double p = *it->second->p_value;
        os << ',' << format_double(p) << ',' << (significant(p) ? 1 : 0);
      }
    }
    os << '\n';
  }
  return os.str();
}

std::string dm_grid_json(const Report& rep) {
  ojson rows = ojson::array();
  std::map<std::string, std::size_t> index;
  for (const auto& c : rep.dm) {
    const auto row = c.series_id + '\n' + c.slice + '\n' + c.candidate;
    auto [it, fresh] = index.try_emplace(row, rows.size());
    if (fresh) rows.push_back({{"series", c.series_id}, {"slice", c.slice}, {"model", c.candidate}, {"p", ojson::object()}});
    rows[it->second]["p"][c.reference] = {{"p_value", c.p_value ? ojson(*c.p_value) : ojson(nullptr)},
                                          {"statistic", c.statistic ? ojson(*c.statistic) : ojson(nullptr)},
                                          {"n", c.n},
                                          {"significant", c.p_value.has_value() && significant(*c.p_value)},
                                          {"note", c.note}};
  }
  ojson doc = {{"loss", std::string(to_string(rep.dm_loss))},
               {"alpha", kSignificanceLevel},
               {"references", rep.dm_references},
               {"rows", std::move(rows)}};
  return doc.dump(2) + "\n";
}

std::string robustness_csv(const Report& rep) {
  std::ostringstream os;
  os << "series,model,window_start,window_end,actual_variance,model_rmse\n";
  for (const auto& f : rep.robustness) {
    if (!f.result) continue;
    for (const auto& p : f.result->points)
      os << csv_field(f.series_id) << ',' << csv_field(f.model_id) << ',' << p.window.start.to_string() << ','
         << p.window.end.to_string() << ',' << format_double(p.actual_variance) << ',' << format_double(p.model_rmse)
         << '\n';
  }
  return os.str();
}

std::string dm_table(const std::vector<BacktestRun>& runs, const std::string& reference, Loss loss,
                     const NamedWindow& window, const DmOptions& options) {
  const auto cells = dm_grid(runs, {window}, {reference}, loss, options);
  std::map<std::string, const BacktestRun*> by_key;
  std::vector<std::string> series_ids, model_ids;
  for (const auto& r : runs) {
    by_key[runs_key(r.series_id, r.model_id)] = &r;
    if (std::find(series_ids.begin(), series_ids.end(), r.series_id) == series_ids.end())
      series_ids.push_back(r.series_id);
    if (std::find(model_ids.begin(), model_ids.end(), r.model_id) == model_ids.end()) model_ids.push_back(r.model_id);
  }
  std::size_t width = 5;
  for (const auto& mid : model_ids) width = std::max(width, mid.size());

  std::ostringstream os;
  os << "Reference: " << reference << "\n";
  os << "Loss: " << to_string(loss) << (options.harvey_correction ? " (Harvey-corrected)" : "") << "\n";
  os << "Window: " << window.name << " (" << window.window.to_string() << ")\n";
  os << "* p < 0.05\n";
  for (const auto& sid : series_ids) {
    os << "\n" << sid << "\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-*s %10s %12s\n", static_cast<int>(width), "Model", "RMSE", "DM p-value");
    os << line;
    for (const auto& mid : model_ids) {
      auto it = by_key.find(runs_key(sid, mid));
      if (it == by_key.end()) continue;
      const auto& run = *it->second;
      double sse = 0.0;
      std::size_t n = 0;
      for (const auto& r : run.records) {
        if (!r.ok || !window.window.contains(r.target)) continue;
        sse += (r.actual - r.forecast) * (r.actual - r.forecast);
        ++n;
      }
      const double rmse_v = n ? std::sqrt(sse / static_cast<double>(n)) : std::numeric_limits<double>::quiet_NaN();
      std::string p = "n/a";
      for (const auto& c : cells)
        if (c.series_id == sid && c.candidate == mid && c.p_value)
          p = fixed(*c.p_value, 4) + (significant(*c.p_value) ? "*" : " ");
      if (p == "n/a") p += ' ';
      std::snprintf(line, sizeof line, "%-*s %10s %12s\n", static_cast<int>(width), mid.c_str(),
                    fixed(rmse_v, 4).c_str(), p.c_str());
      os << line;
    }
  }
  return os.str();
}

}  // namespace macrocast
