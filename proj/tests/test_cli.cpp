#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "macrocast/cli.hpp"
#include "macrocast/csv.hpp"
#include "macrocast/report.hpp"
#include "macrocast/synthetic.hpp"

using namespace macrocast;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() /
          ("macrocast-cli-" + std::to_string(std::random_device{}()) + "-" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name, std::ios::binary) << text;
    return path(name);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Four sectors, 2012Q1-2024Q3, overlapping every default slice.
std::string panel_csv() { return to_csv(synthetic_panel(5, Period{2012, 1}, 51)); }

std::string stub(const std::string& mode) { return std::string(STUB_ADAPTER) + " " + mode; }

}  // namespace

TEST_CASE("ingest prints one span line per series") {
  Scratch s;
  const auto r = cli({"ingest", "--data", s.write("p.csv", panel_csv())});
  CHECK(r.code == exit_code::ok);
  CHECK(r.out ==
        "GDP: 2012Q1-2024Q3, 51 observations, no gaps\nPrimary: 2012Q1-2024Q3, 51 observations, no gaps\n"
        "Goods: 2012Q1-2024Q3, 51 observations, no gaps\nServices: 2012Q1-2024Q3, 51 observations, no gaps\n");
}

TEST_CASE("ingest rejects gaps and empty files with exit 2") {
  Scratch s;
  const auto gap = cli({"ingest", "--data", s.write("g.csv", "period,series_id,value\n2000Q1,GDP,1\n2000Q3,GDP,2\n")});
  CHECK(gap.code == exit_code::invalid_input);
  CHECK(gap.err.find("gap in series 'GDP'") != std::string::npos);
  const auto empty = cli({"ingest", "--data", s.write("e.csv", "")});
  CHECK(empty.code == exit_code::invalid_input);
  CHECK(empty.err.find("no rows") != std::string::npos);
  CHECK(cli({"ingest", "--data", s.path("missing.csv")}).code == exit_code::invalid_input);
  CHECK(cli({"ingest"}).code == exit_code::invalid_input);
  CHECK(cli({"frobnicate"}).code == exit_code::invalid_input);
}

TEST_CASE("backtest writes every artifact and is byte-deterministic") {
  Scratch s;
  const auto data = s.write("p.csv", panel_csv());
  auto run = [&](const std::string& out, const std::string& jobs) {
    return cli({"backtest", "--data", data, "--models", "persistence,lsboost", "--out", s.path(out), "--jobs", jobs});
  };
  const auto a = run("a", "1");
  REQUIRE(a.code == exit_code::ok);
  const auto b = run("b", "2");
  REQUIRE(b.code == exit_code::ok);
  for (const char* f : {"runs.json", "report.json", "report.csv", "report.md", "dm_grid.csv", "dm_grid.json",
                        "robustness.csv"}) {
    CHECK(fs::file_size(s.dir / "a" / f) > 0);
    CHECK(slurp(s.dir / "a" / f) == slurp(s.dir / "b" / f));
  }
  CHECK(a.out.find("artifacts written to") != std::string::npos);

  // Omitted --slices: the four default windows.
  const auto rep = json::parse(slurp(s.dir / "a" / "report.json"));
  REQUIRE(rep["slices"].size() == 4);
  CHECK(rep["slices"][0]["window"] == "1999Q3-2024Q3");
  CHECK(rep["slices"][3]["window"] == "2023Q1-2024Q3");
  CHECK(rep["config"]["models"] == json::array({"persistence", "lsboost"}));
  CHECK(rep["config"]["dm_references"] == json::array({"persistence"}));
  CHECK(rep["config"]["data_sha256"].get<std::string>().size() == 64);
  CHECK(rep["mase"]["m"] == 1);

  // 51 quarters, first origin at the 16th: 35 records per run.
  const auto runs = runs_from_json(slurp(s.dir / "a" / "runs.json"));
  REQUIRE(runs.size() == 8);
  CHECK(runs[0].records.size() == 35);

  const auto mdr = cli({"backtest", "--data", data, "--models", "persistence", "--out", s.path("md"), "--format",
                        "markdown"});
  CHECK(mdr.out.find("## 26-year Past-to-Present (1999Q3-2024Q3)") != std::string::npos);
}

TEST_CASE("config keys override flags, flags override defaults") {
  Scratch s;
  const auto data = s.write("p.csv", panel_csv());
  const auto cfg = s.write("c.json", R"({"models": ["persistence"], "mase_m": 4, "slices": ["all=2012Q1-2024Q3"]})");
  const auto r = cli({"backtest", "--data", data, "--config", cfg, "--models", "lsboost", "--mase-m", "1", "--dm-loss",
                      "absolute", "--out", s.path("o")});
  REQUIRE(r.code == exit_code::ok);
  const auto rep = json::parse(slurp(s.dir / "o" / "report.json"));
  CHECK(rep["config"]["models"] == json::array({"persistence"}));
  CHECK(rep["config"]["mase_m"] == 4);
  CHECK(rep["config"]["dm_loss"] == "absolute");
  CHECK(rep["config"]["horizon"] == 1);
  REQUIRE(rep["slices"].size() == 1);
  CHECK(rep["slices"][0]["name"] == "all");

  const auto bad = cli({"backtest", "--data", data, "--config", s.write("bad.json", R"({"modles": []})")});
  CHECK(bad.code == exit_code::invalid_input);
  CHECK(bad.err.find("unknown config key 'modles'") != std::string::npos);
  CHECK(cli({"backtest", "--data", data, "--config", s.write("t.json", R"({"horizon": "two"})")}).code ==
        exit_code::invalid_input);
  CHECK(cli({"backtest", "--data", s.path("none.csv")}).code == exit_code::invalid_input);
  CHECK(cli({"backtest", "--data", data, "--models", "persistence,persistence"}).code == exit_code::invalid_input);
}

TEST_CASE("backtest exit codes for plan and adapter failures") {
  Scratch s;
  const auto data = s.write("p.csv", panel_csv());
  const auto early = cli({"backtest", "--data", data, "--models", "persistence", "--first-origin", "2012Q4", "--out",
                          s.path("o")});
  CHECK(early.code == exit_code::plan_validation);
  CHECK(early.err.find("training observations") != std::string::npos);
  CHECK(cli({"backtest", "--data", data, "--models", "nosuch", "--out", s.path("o")}).code ==
        exit_code::plan_validation);
  CHECK(cli({"backtest", "--data", data, "--models", "persistence", "--slices", "old=1980Q1-1990Q4", "--out",
             s.path("o")})
            .code == exit_code::plan_validation);

  const auto absent = cli({"backtest", "--data", data, "--models", "persistence", "--adapter",
                           "tsfm=/nonexistent/adapter-binary", "--out", s.path("o")});
  CHECK(absent.code == exit_code::adapter_startup);
  CHECK(cli({"backtest", "--data", data, "--adapter", "tsfm=" + stub("bad-handshake"), "--out", s.path("o")}).code ==
        exit_code::adapter_startup);
  CHECK(cli({"backtest", "--data", data, "--adapter", "tsfm=fixture:" + s.path("none.ndjson"), "--out", s.path("o")})
            .code == exit_code::adapter_startup);
  CHECK(cli({"backtest", "--data", data, "--adapter", "arima=" + stub("echo-last"), "--out", s.path("o")}).code ==
        exit_code::invalid_input);
}

TEST_CASE("a model over its failure budget makes the backtest exit 1") {
  Scratch s;
  const auto data = s.write("p.csv", panel_csv());
  const auto r = cli({"backtest", "--data", data, "--models", "persistence", "--adapter", "tsfm=" + stub("error"),
                      "--out", s.path("o")});
  CHECK(r.code == exit_code::failure_budget);
  CHECK(r.out.find("failure budget exceeded: tsfm on GDP (35 of 35 origins failed)") != std::string::npos);
  const auto rep = json::parse(slurp(s.dir / "o" / "report.json"));
  CHECK(rep["runs"][1]["over_budget"] == true);
  CHECK(rep["slices"][0]["cells"][1]["available"] == false);
}

TEST_CASE("adapter forecasts record to a fixture and replay identically") {
  Scratch s;
  const auto data = s.write("p.csv", panel_csv());
  const auto live = cli({"backtest", "--data", data, "--models", "persistence", "--adapter",
                         "tsfm=" + stub("seasonal-naive"), "--record", s.path("fx"), "--out", s.path("live")});
  REQUIRE(live.code == exit_code::ok);
  REQUIRE(fs::exists(s.dir / "fx" / "tsfm.ndjson"));
  const auto replay = cli({"backtest", "--data", data, "--models", "persistence", "--adapter",
                           "tsfm=fixture:" + s.path("fx/tsfm.ndjson"), "--out", s.path("replay")});
  REQUIRE(replay.code == exit_code::ok);
  CHECK(slurp(s.dir / "live" / "runs.json") == slurp(s.dir / "replay" / "runs.json"));

  // The recorded forecasts are the seasonal-naive values from the truncated history.
  const auto runs = runs_from_json(slurp(s.dir / "live" / "runs.json"));
  const auto panel = synthetic_panel(5, Period{2012, 1}, 51);
  const auto& rec = runs[1].records[0];
  CHECK(runs[1].model_id == "tsfm");
  CHECK(rec.forecast == panel[0][16 - 4]);

  // A cache directory serves the second run without adapter calls.
  const auto c1 = cli({"backtest", "--data", data, "--models", "persistence", "--adapter",
                       "tsfm=" + stub("seasonal-naive"), "--cache-dir", s.path("cache"), "--out", s.path("c1")});
  const auto c2 = cli({"backtest", "--data", data, "--models", "persistence", "--adapter",
                       "tsfm=" + stub("seasonal-naive"), "--cache-dir", s.path("cache"), "--out", s.path("c2")});
  CHECK(c1.out.find("tsfm: 140 calls, 0 cache hits") != std::string::npos);
  CHECK(c2.out.find("tsfm: 0 calls, 140 cache hits") != std::string::npos);
  CHECK(slurp(s.dir / "c1" / "report.json") == slurp(s.dir / "c2" / "report.json"));
}

TEST_CASE("dm prints RMSE and p-values against a reference") {
  Scratch s;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  std::vector<BacktestRun> runs;
  for (const auto& [model, sd] : std::vector<std::pair<std::string, double>>{{"arima", 2.0}, {"close", 0.3}}) {
    BacktestRun run;
    run.series_id = "GDP";
    run.model_id = model;
    for (int t = 0; t < 40; ++t) {
      ForecastRecord r;
      r.origin = Period{2010, 1}.shifted(t);
      r.target = r.origin.successor();
      r.actual = nd(rng);
      r.forecast = r.actual + sd * nd(rng);
      run.records.push_back(r);
    }
    runs.push_back(run);
  }
  // Give both runs the same actuals.
  for (std::size_t i = 0; i < runs[1].records.size(); ++i) {
    const double err = runs[1].records[i].forecast - runs[1].records[i].actual;
    runs[1].records[i].actual = runs[0].records[i].actual;
    runs[1].records[i].forecast = runs[1].records[i].actual + err;
  }
  const auto path = s.write("runs.json", runs_to_json(runs));
  const auto r = cli({"dm", "--runs", path, "--reference", "arima", "--window", "2010Q1-2020Q4"});
  REQUIRE(r.code == exit_code::ok);
  CHECK(r.out.rfind("Reference: arima\n", 0) == 0);
  CHECK(r.out.find("Window: 2010Q1-2020Q4 (2010Q1-2020Q4)") != std::string::npos);
  std::istringstream lines(r.out);
  std::string line, arima_line, close_line;
  while (std::getline(lines, line)) {
    if (line.rfind("arima", 0) == 0) arima_line = line;
    if (line.rfind("close", 0) == 0) close_line = line;
  }
  CHECK(arima_line.find("n/a") != std::string::npos);
  CHECK(close_line.back() == '*');

  const auto md = cli({"dm", "--runs", path, "--format", "markdown"});
  CHECK(md.out.find("| GDP | close | **") != std::string::npos);
  CHECK(cli({"dm", "--runs", path, "--reference", "persistence"}).code == exit_code::invalid_input);
  CHECK(cli({"dm", "--runs", path, "--runs", path}).code == exit_code::invalid_input);
}

TEST_CASE("transform converts index levels to growth rates") {
  Scratch s;
  std::string csv = "period,series_id,value\n";
  for (int t = 0; t < 8; ++t) csv += Period{2000, 1}.shifted(t).to_string() + ",GDP," + std::to_string(100 + 10 * t) + "\n";
  const auto r = cli({"transform", "--data", s.write("lv.csv", csv), "--to", "yoy_percent", "--out", s.path("yoy.csv")});
  REQUIRE(r.code == exit_code::ok);
  const auto yoy = ingest_csv(slurp(s.dir / "yoy.csv"));
  REQUIRE(yoy[0].size() == 4);
  CHECK(yoy[0].start() == Period{2001, 1});
  CHECK(yoy[0][0] == doctest::Approx(100.0 * (140.0 / 100.0 - 1.0)).epsilon(1e-14));
  CHECK(cli({"transform", "--data", s.path("lv.csv"), "--to", "index_level", "--out", s.path("x.csv")}).code ==
        exit_code::invalid_input);
}
