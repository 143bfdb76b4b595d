#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "macrocast/csv.hpp"
#include "macrocast/errors.hpp"
#include "macrocast/report.hpp"
#include "macrocast/synthetic.hpp"

using namespace macrocast;
using nlohmann::json;

namespace {

// Three series from 1995Q3 to 2024Q3; targets from the 17th observation onward.
struct Fixture {
  std::vector<TimeSeries> data = synthetic_panel(11, Period{1995, 3}, 117, {"GDP", "Goods", "Services"});
  std::vector<BacktestRun> runs;

  Fixture() {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    const std::vector<std::pair<std::string, double>> models = {{"sharp", 0.1}, {"blunt", 0.8}, {"naive", -1.0}};
    for (const auto& s : data) {
      for (const auto& [mid, scale] : models) {
        BacktestRun run;
        run.series_id = s.id();
        run.model_id = mid;
        for (Eigen::Index t = 16; t < s.size(); ++t) {
          ForecastRecord r;
          r.origin = s.period(t - 1);
          r.target = s.period(t);
          r.actual = s[t];
          r.forecast = scale < 0 ? s[t - 1] : s[t] + scale * nd(rng);
          run.records.push_back(r);
        }
        runs.push_back(std::move(run));
      }
    }
    // One failed origin in a run keeps the cell available (1 of 101 is within budget).
    auto& r = runs[1].records[40];
    r.ok = false;
    r.forecast = std::numeric_limits<double>::quiet_NaN();
    r.failure = "model_error";
    r.detail = "synthetic";
  }

  Report report(std::vector<NamedWindow> slices = default_slices()) const {
    Report rep;
    rep.config_json = R"({"seed": 7, "models": ["sharp", "blunt", "naive"]})";
    rep.metrics = evaluate_slices(runs, data, slices);
    rep.dm_references = {"naive", "blunt"};
    rep.dm = dm_grid(runs, slices, rep.dm_references, rep.dm_loss);
    rep.robustness = robustness_fits(runs, rep.robustness_options);
    rep.runs = summarize_runs(runs, 0.10);
    return rep;
  }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("runs.json round trips bit-exactly") {
  Fixture fx;
  const auto text = runs_to_json(fx.runs);
  const auto back = runs_from_json(text);
  REQUIRE(back.size() == fx.runs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].series_id == fx.runs[i].series_id);
    CHECK(back[i].model_id == fx.runs[i].model_id);
    REQUIRE(back[i].records.size() == fx.runs[i].records.size());
    for (std::size_t k = 0; k < back[i].records.size(); ++k) {
      const auto &a = back[i].records[k], &b = fx.runs[i].records[k];
      CHECK(a.origin == b.origin);
      CHECK(a.ok == b.ok);
      CHECK(a.failure == b.failure);
      CHECK(same_bits(a.actual, b.actual));
      if (a.ok) CHECK(same_bits(a.forecast, b.forecast));
      else CHECK(std::isnan(a.forecast));
    }
  }
  CHECK(runs_to_json(back) == text);
  CHECK(json::parse(text)["runs"][1]["records"][40]["forecast"].is_null());

  CHECK_THROWS_AS(runs_from_json("{}"), DataError);
  CHECK_THROWS_AS(runs_from_json("[1,"), DataError);
  CHECK_THROWS_AS(runs_from_json(R"({"format":"macrocast.runs","version":2,"runs":[]})"), DataError);
}

TEST_CASE("report.json is deterministic and embeds the resolved config") {
  Fixture fx;
  const auto a = report_json(fx.report());
  const auto b = report_json(Fixture().report());
  CHECK(a == b);
  const auto j = json::parse(a);
  CHECK(j["config"]["seed"] == 7);
  CHECK(j["mase"]["m"] == 1);
  CHECK(j["slices"].size() == 4);
  CHECK(j["slices"][3]["name"] == "2-year Post-COVID-19");
  CHECK(j["slices"][0]["cells"].size() == 9);
  CHECK(j["dm"]["loss"] == "squared");
  CHECK(j["robustness"]["fits"].size() == 9);
  CHECK(j["runs"][1]["failed"] == 1);

  // Full precision: the JSON value parses back to the exact double.
  const auto& cell = j["slices"][0]["cells"][0];
  const auto ev = fx.report().metrics.slices[0].cells.at("GDP").at("sharp");
  CHECK(same_bits(cell["rmse"].get<double>(), ev.rmse));

  Report bad = fx.report();
  bad.config_json = "not json";
  CHECK_THROWS_AS(report_json(bad), InvalidArgument);
}

TEST_CASE("mean rank equals the arithmetic mean of per-series RMSE ranks") {
  Fixture fx;
  const auto j = json::parse(report_json(fx.report()));
  for (const auto& sl : j["slices"]) {
    const auto w = Window::parse(sl["window"].get<std::string>());
    std::map<std::string, double> total;
    for (const auto& s : fx.data) {
      // Oracle: recompute RMSE from the records and rank by sorting.
      std::vector<std::pair<double, std::string>> col;
      for (const auto& run : fx.runs) {
        if (run.series_id != s.id()) continue;
        double sse = 0.0;
        int n = 0;
        for (const auto& r : run.records)
          if (r.ok && w.contains(r.target)) {
            sse += (r.actual - r.forecast) * (r.actual - r.forecast);
            ++n;
          }
        col.emplace_back(std::sqrt(sse / n), run.model_id);
      }
      std::sort(col.begin(), col.end());
      for (std::size_t k = 0; k < col.size(); ++k) total[col[k].second] += static_cast<double>(k + 1);
    }
    for (const auto& [mid, t] : total) CHECK(sl["mean_rank"][mid].get<double>() == doctest::Approx(t / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("markdown grid has one block per slice and a Mean Rank column") {
  Fixture fx;
  const auto md = report_markdown(fx.report());
  const auto lines = lines_of(md);
  for (const auto& sl : default_slices()) {
    const auto header = "## " + sl.name + " (" + sl.window.to_string() + ")";
    auto it = std::find(lines.begin(), lines.end(), header);
    REQUIRE(it != lines.end());
    const auto& cols = *(it + 2);
    CHECK(cols.find("| Model | GDP MAE | GDP RMSE | GDP SMAPE | GDP MASE | Goods MAE") == 0);
    CHECK(cols.size() - cols.rfind("| Mean Rank |") == std::strlen("| Mean Rank |"));
    for (int r = 0; r < 3; ++r) {
      const auto& row = *(it + 4 + r);
      CHECK(std::count(row.begin(), row.end(), '|') == 2 + 3 * 4 + 1);
    }
  }
  CHECK(md.find("lag-1 naive MAE") != std::string::npos);
  // The sharp model is best everywhere: rank 1 in every slice.
  CHECK(md.find("| sharp | ") != std::string::npos);
  CHECK(md.find(" 1.00 |\n| blunt") != std::string::npos);
  CHECK(md.find("(good)") != std::string::npos);
}

TEST_CASE("significance is flagged exactly below 0.05") {
  CHECK(format_p_value(0.049) == "**0.0490**");
  CHECK(format_p_value(0.051) == "0.0510");
  CHECK(format_p_value(0.05) == "0.0500");
  CHECK(format_p_value(std::nullopt) == "n/a");

  Report rep;
  rep.dm_references = {"ref"};
  rep.dm = {DmCell{"GDP", "full", "a", "ref", 2.0, 0.049, 20, {}}, DmCell{"GDP", "full", "b", "ref", 1.9, 0.051, 20, {}},
            DmCell{"GDP", "full", "ref", "ref", std::nullopt, std::nullopt, 20, "degenerate"}};
  const auto csv = lines_of(dm_grid_csv(rep));
  REQUIRE(csv.size() == 4);
  CHECK(csv[0] == "series,slice,model,p_ref,significant_ref");
  CHECK(csv[1] == "GDP,full,a,0.049,1");
  CHECK(csv[2] == "GDP,full,b,0.051,0");
  CHECK(csv[3] == "GDP,full,ref,n/a,");
  const auto j = json::parse(dm_grid_json(rep));
  CHECK(j["rows"][0]["p"]["ref"]["significant"] == true);
  CHECK(j["rows"][1]["p"]["ref"]["significant"] == false);
  CHECK(j["rows"][2]["p"]["ref"]["p_value"].is_null());
}

TEST_CASE("DM grid layout mirrors sector blocks by slices by models") {
  Fixture fx;
  const auto rep = fx.report();
  const auto csv = lines_of(dm_grid_csv(rep));
  REQUIRE(csv.size() == 1 + 3 * 4 * 3);
  CHECK(csv[0] == "series,slice,model,p_naive,significant_naive,p_blunt,significant_blunt");
  CHECK(csv[1].rfind("GDP,26-year Past-to-Present,sharp,", 0) == 0);
  CHECK(csv[3].rfind("GDP,26-year Past-to-Present,naive,n/a,,", 0) == 0);
  CHECK(csv[13].rfind("Goods,", 0) == 0);
  // Each p-value in the grid is the cellwise DM call.
  for (const auto& c : rep.dm) {
    if (!c.p_value) continue;
    const auto line = c.series_id + "," + c.slice + "," + c.candidate + ",";
    const auto row = std::find_if(csv.begin(), csv.end(), [&](const auto& l) { return l.rfind(line, 0) == 0; });
    REQUIRE(row != csv.end());
    CHECK(row->find(format_double(*c.p_value)) != std::string::npos);
  }
  const auto md = report_markdown(rep);
  CHECK(md.find("| p vs naive | p vs blunt |") != std::string::npos);
  CHECK(md.find("**0.0000**") != std::string::npos);
}

TEST_CASE("robustness CSV carries every sampled window") {
  Fixture fx;
  const auto rep = fx.report();
  const auto csv = lines_of(robustness_csv(rep));
  CHECK(csv[0] == "series,model,window_start,window_end,actual_variance,model_rmse");
  CHECK(csv.size() == 1 + 9 * 200);
  const auto& p = rep.robustness[0].result->points[0];
  CHECK(csv[1] == "GDP,sharp," + p.window.start.to_string() + "," + p.window.end.to_string() + "," +
                      format_double(p.actual_variance) + "," + format_double(p.model_rmse));
  const auto j = json::parse(report_json(rep));
  CHECK(j["robustness"]["fits"][0]["slope"].get<double>() == rep.robustness[0].result->slope);

  std::vector<BacktestRun> short_run(1, fx.runs[0]);
  short_run[0].records.resize(5);
  const auto fits = robustness_fits(short_run, {});
  REQUIRE(fits.size() == 1);
  CHECK(!fits[0].result);
  CHECK(fits[0].note.find("fewer than the minimum window") != std::string::npos);
}

TEST_CASE("DM table against a reference") {
  Fixture fx;
  const auto full = default_slices()[0];
  const auto text = dm_table(fx.runs, "naive", Loss::squared, full);
  const auto lines = lines_of(text);
  CHECK(lines[0] == "Reference: naive");
  CHECK(lines[2] == "Window: 26-year Past-to-Present (1999Q3-2024Q3)");
  const auto gdp = std::find(lines.begin(), lines.end(), "GDP");
  REQUIRE(gdp != lines.end());
  CHECK((gdp + 1)->find("RMSE") != std::string::npos);
  // The dominating model is flagged, the reference against itself is n/a.
  CHECK((gdp + 2)->rfind("sharp", 0) == 0);
  CHECK((gdp + 2)->back() == '*');
  CHECK((gdp + 4)->rfind("naive", 0) == 0);
  CHECK((gdp + 4)->find("n/a") != std::string::npos);

  double sse = 0.0;
  int n = 0;
  for (const auto& r : fx.runs[0].records) {
    sse += (r.actual - r.forecast) * (r.actual - r.forecast);
    ++n;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", std::sqrt(sse / n));
  CHECK((gdp + 2)->find(buf) != std::string::npos);
}
