#include "macrocast/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "macrocast/config.hpp"
#include "macrocast/csv.hpp"
#include "macrocast/errors.hpp"
#include "macrocast/gateway.hpp"
#include "macrocast/report.hpp"
#include "macrocast/selftest.hpp"

namespace macrocast {

namespace fs = std::filesystem;

namespace {

// Raised inside a subcommand to leave with a specific exit code.
struct Exit {
  int code;
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{exit_code::invalid_input, "cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw std::runtime_error("cannot write '" + path.string() + "'");
}

int default_jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

enum class TextFormat { text, markdown };

TextFormat parse_format(const std::string& s) {
  if (s == "text") return TextFormat::text;
  if (s == "markdown" || s == "md") return TextFormat::markdown;
  throw Exit{exit_code::invalid_input, "unknown --format '" + s + "' (text or markdown)"};
}

// Flags of the backtest subcommand; applied to the defaults before the config file.
struct BacktestFlags {
  std::string data, config, models, first_origin, dm_loss, cache_dir, out, format = "text", record_dir, series;
  std::vector<std::string> slices, adapters, references;
  int horizon = 1, mase_m = 1, jobs = 0;
  std::uint64_t seed = 0;
  CLI::Option *o_data, *o_models, *o_horizon, *o_first, *o_slices, *o_mase, *o_loss, *o_adapter, *o_cache, *o_out,
      *o_seed, *o_jobs, *o_record, *o_series, *o_refs;
};

void add_backtest_flags(CLI::App* cmd, BacktestFlags& f) {
  f.o_data = cmd->add_option("--data", f.data, "CSV with columns period,series_id,value");
  cmd->add_option("--config", f.config, "JSON config; its keys override flags");
  f.o_models = cmd->add_option("--models", f.models, "comma-separated model ids (default: all builtins)");
  f.o_series = cmd->add_option("--series", f.series, "comma-separated series ids (default: all)");
  f.o_horizon = cmd->add_option("--horizon", f.horizon, "forecast horizon in quarters")->check(CLI::PositiveNumber);
  f.o_first = cmd->add_option("--first-origin", f.first_origin, "first forecast origin, YYYYQn");
  f.o_slices = cmd->add_option("--slices", f.slices, "evaluation windows, [name=]YYYYQn-YYYYQn (repeatable)");
  f.o_mase = cmd->add_option("--mase-m", f.mase_m, "MASE naive lag")->check(CLI::PositiveNumber);
  f.o_loss = cmd->add_option("--dm-loss", f.dm_loss, "squared or absolute");
  f.o_refs = cmd->add_option("--dm-reference", f.references, "DM reference model (repeatable)");
  f.o_adapter = cmd->add_option("--adapter", f.adapters, "NAME=CMD, NAME=fixture:PATH or NAME=http://HOST:PORT/PATH");
  f.o_cache = cmd->add_option("--cache-dir", f.cache_dir, "content-addressed cache of external forecasts");
  f.o_record = cmd->add_option("--record", f.record_dir, "write one replay fixture per adapter into this directory");
  f.o_out = cmd->add_option("--out", f.out, "output directory");
  f.o_seed = cmd->add_option("--seed", f.seed, "seed for robustness window sampling");
  f.o_jobs = cmd->add_option("--jobs", f.jobs, "parallel forecast tasks (default: logical cores)")
                 ->check(CLI::PositiveNumber);
  cmd->add_option("--format", f.format, "stdout layout: text or markdown");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

RunConfig resolve_config(const BacktestFlags& f) {
  RunConfig cfg;
  cfg.jobs = default_jobs();
  try {
    if (f.o_data->count()) cfg.data = f.data;
    if (f.o_models->count()) cfg.models = split_list(f.models);
    if (f.o_series->count()) cfg.series = split_list(f.series);
    if (f.o_horizon->count()) cfg.horizon = f.horizon;
    if (f.o_first->count()) cfg.first_origin = Period::parse(f.first_origin);
    if (f.o_slices->count()) {
      cfg.slices.clear();
      for (const auto& s : f.slices) cfg.slices.push_back(parse_named_window(s));
    }
    if (f.o_mase->count()) cfg.mase_m = f.mase_m;
    if (f.o_loss->count()) cfg.dm_loss = parse_loss(f.dm_loss);
    if (f.o_refs->count()) cfg.dm_references = f.references;
    for (const auto& a : f.adapters) {
      const auto eq = a.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == a.size())
        throw InvalidArgument("--adapter expects NAME=CMD, got '" + a + "'");
      cfg.adapters[a.substr(0, eq)] = a.substr(eq + 1);
    }
    if (f.o_cache->count()) cfg.cache_dir = f.cache_dir;
    if (f.o_record->count()) cfg.record_dir = f.record_dir;
    if (f.o_out->count()) cfg.out = f.out;
    if (f.o_seed->count()) cfg.seed = f.seed;
    if (f.o_jobs->count()) cfg.jobs = f.jobs;
    if (!f.config.empty()) apply_config_json(cfg, read_file(f.config));
  } catch (const InvalidArgument& e) {
    throw Exit{exit_code::invalid_input, e.what()};
  } catch (const DataError& e) {
    throw Exit{exit_code::invalid_input, e.what()};
  }
  if (cfg.data.empty()) throw Exit{exit_code::invalid_input, "no data file given (--data or config key 'data')"};
  if (!fs::exists(cfg.data)) throw Exit{exit_code::invalid_input, "data file '" + cfg.data + "' does not exist"};
  const auto ids = cfg.model_ids();
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (std::find(ids.begin() + static_cast<std::ptrdiff_t>(i) + 1, ids.end(), ids[i]) != ids.end())
      throw Exit{exit_code::invalid_input, "model '" + ids[i] + "' listed twice"};
  if (cfg.jobs < 1) throw Exit{exit_code::invalid_input, "jobs must be at least 1"};
  return cfg;
}

std::unique_ptr<Adapter> open_adapter(const std::string& spec, const RunConfig& cfg) {
  const auto startup = std::chrono::milliseconds(std::max(cfg.adapter_timeout_ms, 1000));
  if (spec.rfind("fixture:", 0) == 0) return replay_fixture(spec.substr(8));
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) return make_http_adapter(spec, startup);
  return make_subprocess_adapter(spec, startup);
}

std::string fixture_file_name(const std::string& adapter) {
  std::string s = adapter;
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  return s + ".ndjson";
}

int cmd_backtest(const BacktestFlags& flags, std::ostream& out) {
  const auto cfg = resolve_config(flags);
  const auto format = parse_format(flags.format);
  const auto data_text = read_file(cfg.data);
  std::vector<TimeSeries> data;
  try {
    data = ingest_csv(data_text, cfg.unit);
  } catch (const DataError& e) {
    throw Exit{exit_code::invalid_input, cfg.data + ": " + e.what()};
  }

  ForecasterRegistry registry;
  std::map<std::string, std::shared_ptr<Gateway>> gateways;
  try {
    registry.add(make_persistence_forecaster());
    registry.add(make_arima_forecaster(cfg.arima));
    registry.add(make_lsboost_forecaster(cfg.lsboost));
    registry.add(make_factor_forecaster(cfg.factor));
    for (const auto& [name, spec] : cfg.adapters) {
      if (registry.contains(name)) throw InvalidArgument("adapter name '" + name + "' clashes with a builtin model");
      GatewayOptions go;
      go.timeout = std::chrono::milliseconds(cfg.adapter_timeout_ms);
      if (cfg.cache_dir) go.cache_dir = fs::path(*cfg.cache_dir);
      go.record = cfg.record_dir.has_value();
      auto gw = std::make_shared<Gateway>(open_adapter(spec, cfg), go);
      gateways[name] = gw;
      registry.add(make_gateway_forecaster(name, gw));
    }
  } catch (const AdapterStartupError& e) {
    throw Exit{exit_code::adapter_startup, e.what()};
  } catch (const ProtocolError& e) {
    throw Exit{exit_code::adapter_startup, e.what()};
  } catch (const InvalidArgument& e) {
    throw Exit{exit_code::invalid_input, e.what()};
  }

  BacktestPlan plan;
  plan.series_ids = cfg.series;
  plan.model_ids = cfg.model_ids();
  plan.first_origin = cfg.first_origin;
  plan.last_origin = cfg.last_origin;
  plan.horizon = cfg.horizon;
  plan.refit_stride = cfg.refit_stride;
  plan.slices = cfg.slices;
  plan.failure_budget = cfg.failure_budget;
  plan.jobs = cfg.jobs;
  try {
    validate_plan(plan, data, registry);
  } catch (const InvalidArgument& e) {
    throw Exit{exit_code::plan_validation, e.what()};
  }

  const auto runs = run_backtest(plan, data, registry);

  Report rep;
  rep.config_json = resolved_config_json(cfg, sha256_hex(data_text));
  EvaluationOptions eo;
  eo.mase_m = cfg.mase_m;
  eo.mase_per_origin = cfg.mase_per_origin;
  rep.metrics = evaluate_slices(runs, data, cfg.slices, eo);
  rep.dm_loss = cfg.dm_loss;
  rep.dm_references = cfg.references();
  DmOptions dmo;
  dmo.harvey_correction = cfg.harvey;
  rep.dm = dm_grid(runs, cfg.slices, rep.dm_references, cfg.dm_loss, dmo);
  rep.robustness_options = cfg.robustness;
  rep.robustness_options.seed = cfg.seed;
  rep.robustness = robustness_fits(runs, rep.robustness_options);
  rep.runs = summarize_runs(runs, cfg.failure_budget);

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_file(dir / "runs.json", runs_to_json(runs));
  write_file(dir / "report.json", report_json(rep));
  write_file(dir / "report.csv", report_csv(rep));
  const auto md = report_markdown(rep);
  write_file(dir / "report.md", md);
  write_file(dir / "dm_grid.csv", dm_grid_csv(rep));
  write_file(dir / "dm_grid.json", dm_grid_json(rep));
  write_file(dir / "robustness.csv", robustness_csv(rep));
  if (cfg.record_dir) {
    fs::create_directories(*cfg.record_dir);
    for (const auto& [name, gw] : gateways) gw->write_fixture(fs::path(*cfg.record_dir) / fixture_file_name(name));
  }

  if (format == TextFormat::markdown) {
    out << md;
  } else {
    out << "runs: " << runs.size() << " (" << rep.metrics.series_ids.size() << " series x "
        << rep.metrics.model_ids.size() << " models)\n";
    for (const auto& ev : rep.metrics.slices) {
      out << ev.slice.name << " (" << ev.slice.window.to_string() << ") mean RMSE rank:";
      for (const auto& mid : rep.metrics.model_ids) {
        auto it = ev.mean_rank.find(mid);
        out << ' ' << mid << '=';
        if (it == ev.mean_rank.end()) {
          out << "n/a";
        } else {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.2f", it->second);
          out << buf;
        }
      }
      out << '\n';
    }
    for (const auto& [name, gw] : gateways)
      out << "adapter " << name << ": " << gw->adapter_calls() << " calls, " << gw->cache_hits() << " cache hits\n";
    out << "artifacts written to " << dir.string() << '\n';
  }
  bool over = false;
  for (const auto& s : rep.runs) {
    if (!s.over_budget) continue;
    over = true;
    out << "failure budget exceeded: " << s.model_id << " on " << s.series_id << " (" << s.failed << " of "
        << s.records << " origins failed)\n";
  }
  return over ? exit_code::failure_budget : exit_code::ok;
}

int cmd_ingest(const std::string& path, const std::string& unit, std::ostream& out) {
  std::vector<TimeSeries> data;
  try {
    data = ingest_csv(read_file(path), parse_unit(unit));
  } catch (const DataError& e) {
    throw Exit{exit_code::invalid_input, path + ": " + e.what()};
  } catch (const InvalidArgument& e) {
    throw Exit{exit_code::invalid_input, e.what()};
  }
  for (const auto& s : data)
    out << s.id() << ": " << s.span().to_string() << ", " << s.size() << " observations, no gaps\n";
  return exit_code::ok;
}

int cmd_transform(const std::string& path, const std::string& to, const std::string& dest, std::ostream& out) {
  std::vector<TimeSeries> levels;
  try {
    levels = ingest_csv(read_file(path), Unit::index_level);
  } catch (const DataError& e) {
    throw Exit{exit_code::invalid_input, path + ": " + e.what()};
  }
  std::vector<TimeSeries> growth;
  try {
    const auto unit = parse_unit(to);
    for (const auto& s : levels) {
      if (unit == Unit::yoy_percent)
        growth.push_back(yoy_from_level(s));
      else if (unit == Unit::qoq_percent)
        growth.push_back(qoq_from_level(s));
      else
        throw InvalidArgument("--to must be yoy_percent or qoq_percent");
    }
  } catch (const std::exception& e) {
    throw Exit{exit_code::invalid_input, e.what()};
  }
  write_file(dest, to_csv(growth));
  out << "wrote " << growth.size() << " series (" << to << ") to " << dest << '\n';
  return exit_code::ok;
}

struct DmFlags {
  std::vector<std::string> runs;
  std::string reference = "arima", window, loss = "squared", format = "text";
  bool harvey = false;
};

int cmd_dm(const DmFlags& f, std::ostream& out) {
  std::vector<BacktestRun> runs;
  for (const auto& path : f.runs) {
    try {
      for (auto& r : runs_from_json(read_file(path))) {
        for (const auto& seen : runs)
          if (seen.series_id == r.series_id && seen.model_id == r.model_id)
            throw Exit{exit_code::invalid_input,
                       "run " + r.model_id + " on " + r.series_id + " appears in more than one runs file"};
        runs.push_back(std::move(r));
      }
    } catch (const DataError& e) {
      throw Exit{exit_code::invalid_input, path + ": " + e.what()};
    }
  }
  const bool has_ref =
      std::any_of(runs.begin(), runs.end(), [&](const BacktestRun& r) { return r.model_id == f.reference; });
  if (!has_ref) throw Exit{exit_code::invalid_input, "reference model '" + f.reference + "' is not in the runs"};
  NamedWindow window = default_slices().front();
  Loss loss = Loss::squared;
  try {
    if (!f.window.empty()) window = parse_named_window(f.window);
    loss = parse_loss(f.loss);
  } catch (const std::exception& e) {
    throw Exit{exit_code::invalid_input, e.what()};
  }
  DmOptions opt;
  opt.harvey_correction = f.harvey;
  if (parse_format(f.format) == TextFormat::text) {
    out << dm_table(runs, f.reference, loss, window, opt);
    return exit_code::ok;
  }
  Report rep;
  rep.dm_loss = loss;
  rep.dm_references = {f.reference};
  rep.dm = dm_grid(runs, {window}, rep.dm_references, loss, opt);
  out << "Reference: " << f.reference << ", window: " << window.name << " (" << window.window.to_string()
      << "), loss: " << to_string(loss) << "\n\n| Series | Model | p vs " << f.reference << " |\n|---|---|---:|\n";
  for (const auto& c : rep.dm)
    out << "| " << c.series_id << " | " << c.candidate << " | " << format_p_value(c.p_value) << " |\n";
  return exit_code::ok;
}

int cmd_selftest(std::uint64_t seed, const std::string& reference_csv, const std::string& scratch, std::ostream& out) {
  SelftestOptions opt;
  opt.seed = seed;
  if (!reference_csv.empty())
    opt.reference_csv = reference_csv;
  else if (const char* env = std::getenv("MACROCAST_STATSNZ_CSV"); env && *env)
    opt.reference_csv = env;
  if (!scratch.empty()) opt.scratch_dir = scratch;
  const auto results = run_selftest(opt, [&](const CriterionResult& r) { out << format_result(r) << std::endl; });
  return all_passed(results) ? exit_code::ok : exit_code::failure_budget;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Backtest and compare quarterly macroeconomic forecasters", "macrocast"};
  app.require_subcommand(1);

  std::string ingest_data, ingest_unit = "yoy_percent";
  auto* ingest = app.add_subcommand("ingest", "validate a CSV and print each series' span");
  ingest->add_option("--data", ingest_data, "CSV with columns period,series_id,value")->required();
  ingest->add_option("--unit", ingest_unit, "yoy_percent, qoq_percent or index_level");

  BacktestFlags bt;
  auto* backtest = app.add_subcommand("backtest", "run the expanding-window backtest and write reports");
  add_backtest_flags(backtest, bt);

  DmFlags dm;
  auto* dmc = app.add_subcommand("dm", "RMSE and Diebold-Mariano p-values against a reference model");
  dmc->add_option("--runs", dm.runs, "runs.json from a backtest (repeatable)")->required();
  dmc->add_option("--reference", dm.reference, "reference model id");
  dmc->add_option("--window", dm.window, "[name=]YYYYQn-YYYYQn (default: full sample)");
  dmc->add_option("--dm-loss", dm.loss, "squared or absolute");
  dmc->add_flag("--harvey", dm.harvey, "small-sample correction with Student-t p-values");
  dmc->add_option("--format", dm.format, "text or markdown");

  std::string tr_data, tr_to = "yoy_percent", tr_out;
  auto* transform = app.add_subcommand("transform", "convert index levels to growth rates");
  transform->add_option("--data", tr_data, "CSV of index levels")->required();
  transform->add_option("--to", tr_to, "yoy_percent or qoq_percent");
  transform->add_option("--out", tr_out, "destination CSV")->required();

  std::uint64_t st_seed = 20240917;
  std::string st_csv, st_scratch;
  auto* selftest = app.add_subcommand("selftest", "run the acceptance criteria");
  selftest->add_option("--seed", st_seed, "seed for every simulation");
  selftest->add_option("--reference-data", st_csv, "published-vintage CSV for the report-only check");
  selftest->add_option("--scratch", st_scratch, "directory for CLI determinism runs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_code::ok : exit_code::invalid_input;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_data, ingest_unit, out);
    if (*backtest) return cmd_backtest(bt, out);
    if (*dmc) return cmd_dm(dm, out);
    if (*transform) return cmd_transform(tr_data, tr_to, tr_out, out);
    if (*selftest) return cmd_selftest(st_seed, st_csv, st_scratch, out);
  } catch (const Exit& e) {
    err << "error: " << e.message << '\n';
    return e.code;
  }
  return exit_code::invalid_input;
}

}  // namespace macrocast
